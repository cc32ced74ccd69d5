"""Scenario config files: INI-style sections with line-anchored validation errors.

Sections: [scenario], [traffic], [channel] (defaults for every hop), [channel.hop.N],
[qos], [solver] and the optional [provision].
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .channel import ChannelConfig
from .errors import ConfigError
from .montecarlo import Scenario
from .traffic import TrafficConfig
from .units import ms_to_slots


def _float_list(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _int_list(text: str) -> tuple:
    out = []
    for x in text.replace(",", " ").split():
        v = float(x)
        if v != int(v):
            raise ValueError(f"{x} is not an integer")
        out.append(int(v))
    return tuple(out)


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text} is not an integer")
    return int(v)


_str = str
SCHEMA: dict[str, dict[str, Callable]] = {
    "scenario": dict(id=_str, hops=_int, horizon=_int, warmup=_int, analysis_slot=_int, realizations=_int,
                     master_seed=_int, slot_ms=float, estimation_fraction=float, block_size=_int, batches=_int),
    "traffic": dict(mean_rate_mbps=float, mean_rate_bits_per_slot=float, request_rate=float,
                    burst_distribution=_str, seed=_int),
    "channel": dict(model=_str, link_distance_m=float, carrier_frequency_ghz=float, bs_height_m=float,
                    ut_height_m=float, inter_site_distance_m=float, street_width_m=float, building_height_m=float,
                    shadow_sigma_db=float, los=_str, tx_power_dbm=float, noise_density_dbm_hz=float,
                    bandwidth_hz=float, bandwidth_mhz=float, interferer_powers_dbm=_float_list, seed=_int),
    "qos": dict(wb_slots=_int_list, wb_ms=_float_list, epsilon=float),
    "solver": dict(theta_mode=_str, fixed_theta=float, backlog_mode=_str, event=_str, theta_min=float,
                   theta_max=float, tolerance=float),
    "provision": dict(traffic_mbps=_float_list, wb_ms=_float_list, epsilon=float),
}
HOP_SECTION = re.compile(r"^channel\.hop\.(\d+)$")

# Scenario invariant keys mapped to the config key that sets them.
_INVARIANT_KEYS = {
    "hops": ("scenario", "hops"), "channels": ("scenario", "hops"), "wb_grid": ("qos", None),
    "analysis_slot": ("scenario", "analysis_slot"), "warmup": ("scenario", "warmup"),
    "horizon": ("scenario", "horizon"), "realizations": ("scenario", "realizations"),
    "epsilon": ("qos", "epsilon"), "estimation_fraction": ("scenario", "estimation_fraction"),
    "theta_mode": ("solver", "theta_mode"), "backlog_mode": ("solver", "backlog_mode"),
    "event": ("solver", "event"), "fixed_theta": ("solver", "fixed_theta"), "theta_min": ("solver", "theta_min"),
    "block_size": ("scenario", "block_size"),
}


SWEEP_KEY = re.compile(r"^wb_slots_(\d+)$")


class _SweepSchema(dict):
    """[sweep] accepts wb_slots_<hops> keys for per-hop-count grids."""

    def __contains__(self, key):
        return bool(SWEEP_KEY.match(str(key)))

    def __getitem__(self, key):
        return _int_list


def _schema_for(section: str) -> Optional[dict]:
    if HOP_SECTION.match(section):
        return SCHEMA["channel"]
    if section == "sweep":
        return _SweepSchema()
    return SCHEMA.get(section)


@dataclass
class ProvisionPlan:
    traffic_mbps: tuple = (7.0, 11.0, 16.0)
    wb_ms: tuple = (10.0, 20.0)
    epsilon: float = 1e-5


@dataclass
class ParsedConfig:
    scenario: Scenario
    provision: ProvisionPlan
    source: str
    raw: dict = field(default_factory=dict)

    def resolved_text(self) -> str:
        """The fully resolved key/value view as INI text."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec, kv in self.raw.items():
            cp[sec] = {k: v for k, v in kv.items()}
        import io
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


class _Locator:
    """Maps (section, key) to source line numbers for error messages."""

    def __init__(self, text: str, path: str):
        self.path = path
        self.lines: dict = {}
        section = None
        for no, line in enumerate(text.splitlines(), start=1):
            s = line.strip()
            if not s or s[0] in "#;":
                continue
            m = re.match(r"^\[(.+)\]$", s)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = no
            elif section is not None and re.match(r"^[^=:]+[=:]", s):
                key = re.split(r"[=:]", s, 1)[0].strip()
                self.lines[(section, key)] = no

    def where(self, section, key=None) -> str:
        no = self.lines.get((section, key)) or self.lines.get((section, None))
        loc = f"{self.path}:{no}" if no else self.path
        return f"{loc}: [{section}]" + (f" {key}" if key else "")


def apply_overrides(raw: dict, overrides) -> None:
    """Apply ``section.key=value`` overrides; the section path must be known."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        path, value = item.split("=", 1)
        path = path.strip()
        if "." not in path:
            raise ConfigError(f"override key {path!r} must be section.key")
        section, key = path.rsplit(".", 1)
        schema = _schema_for(section)
        if schema is None:
            raise ConfigError(f"override {path!r}: unknown section [{section}]")
        if key not in schema:
            raise ConfigError(f"override {path!r}: unknown key {key!r} for [{section}]")
        raw.setdefault(section, {})[key] = value.strip()


def parse_config(path, overrides=None) -> Scenario:
    return load_config(path, overrides).scenario


def load_config(path, overrides=None) -> ParsedConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    return parse_config_text(text, str(path), overrides)


def parse_config_text(text: str, source: str = "<config>", overrides=None) -> ParsedConfig:
    loc = _Locator(text, source)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed config: {exc}") from None
    raw = {sec: dict(cp[sec]) for sec in cp.sections()}
    apply_overrides(raw, overrides)

    values: dict = {}
    for sec, kv in raw.items():
        schema = _schema_for(sec)
        if schema is None:
            raise ConfigError(f"{loc.where(sec)}: unknown section")
        for key, text_value in kv.items():
            if key not in schema:
                raise ConfigError(f"{loc.where(sec, key)}: unknown key")
            try:
                values[(sec, key)] = schema[key](text_value)
            except ValueError as exc:
                raise ConfigError(f"{loc.where(sec, key)}: cannot parse {text_value!r}: {exc}") from None

    def get(sec, key, default=None, required=False):
        if (sec, key) in values:
            return values[(sec, key)]
        if required:
            raise ConfigError(f"{loc.where(sec)}: missing required key {key!r}")
        return default

    def build(ctor, sec_key_pairs, **kw):
        try:
            return ctor(**kw)
        except ConfigError as exc:
            sec, key = sec_key_pairs
            raise ConfigError(f"{loc.where(sec, key)}: {exc}") from None

    for sec in ("scenario", "traffic", "qos"):
        if sec not in raw:
            raise ConfigError(f"{source}: missing section [{sec}]")

    slot_seconds = get("scenario", "slot_ms", 0.5) * 1e-3
    hops = get("scenario", "hops", required=True)

    # Traffic.
    if ("traffic", "mean_rate_bits_per_slot") in values:
        rate = values[("traffic", "mean_rate_bits_per_slot")]
    elif ("traffic", "mean_rate_mbps") in values:
        rate = values[("traffic", "mean_rate_mbps")] * 1e6 * slot_seconds
    else:
        raise ConfigError(f"{loc.where('traffic')}: missing mean_rate_mbps or mean_rate_bits_per_slot")
    traffic = build(TrafficConfig, ("traffic", "mean_rate_mbps"), mean_rate_bits_per_slot=rate,
                    request_rate=get("traffic", "request_rate", 1.0),
                    burst_distribution=get("traffic", "burst_distribution", "fixed"), seed=get("traffic", "seed", 0))

    # Channels: [channel] gives defaults, [channel.hop.N] overrides per hop.
    hop_secs = {int(HOP_SECTION.match(s).group(1)): s for s in raw if HOP_SECTION.match(s)}
    for n in hop_secs:
        if not 1 <= n <= hops:
            raise ConfigError(f"{loc.where(hop_secs[n])}: hop index {n} outside 1..{hops}")
    channels = []
    for n in range(1, hops + 1):
        kw = {}
        for sec in ("channel", hop_secs.get(n)):
            if sec is None:
                continue
            for key in raw.get(sec, {}):
                kw[key] = values[(sec, key)]
        if not kw:
            raise ConfigError(f"{source}: no channel settings for hop {n} (add [channel] or [channel.hop.{n}])")
        if "bandwidth_mhz" in kw:
            kw["bandwidth_hz"] = kw.pop("bandwidth_mhz") * 1e6
        where = (hop_secs.get(n, "channel"), None)
        channels.append(build(ChannelConfig, where, **kw))

    # W^b grid.
    if ("qos", "wb_slots") in values:
        grid = values[("qos", "wb_slots")]
    elif ("qos", "wb_ms") in values:
        try:
            grid = tuple(ms_to_slots(v, slot_seconds) for v in values[("qos", "wb_ms")])
        except ValueError as exc:
            raise ConfigError(f"{loc.where('qos', 'wb_ms')}: {exc}") from None
    else:
        raise ConfigError(f"{loc.where('qos')}: missing wb_slots or wb_ms")

    kw = dict(
        id=get("scenario", "id", "scenario"), hops=hops, traffic=traffic, channels=tuple(channels),
        horizon=get("scenario", "horizon", required=True), warmup=get("scenario", "warmup", required=True),
        analysis_slot=get("scenario", "analysis_slot", required=True), wb_grid=grid,
        epsilon=get("qos", "epsilon", 1e-5), realizations=get("scenario", "realizations", 100_000),
        master_seed=get("scenario", "master_seed", 0), slot_seconds=slot_seconds,
        estimation_fraction=get("scenario", "estimation_fraction", 0.2),
        theta_mode=get("solver", "theta_mode", "per_wb"), fixed_theta=get("solver", "fixed_theta"),
        backlog_mode=get("solver", "backlog_mode", "mean"), event=get("solver", "event", "strict"),
        block_size=get("scenario", "block_size", 500), batches=get("scenario", "batches", 10),
        theta_min=get("solver", "theta_min", 1e-8), theta_max=get("solver", "theta_max", 10.0),
        solver_tol=get("solver", "tolerance", 1e-6),
    )
    try:
        scn = Scenario(**kw)
    except ConfigError as exc:
        sec, key = _INVARIANT_KEYS.get(getattr(exc, "key", ""), ("scenario", None))
        if sec == "qos" and key is None:
            key = "wb_slots" if ("qos", "wb_slots") in values else "wb_ms"
        raise ConfigError(f"{loc.where(sec, key)}: {exc}") from None

    prov = ProvisionPlan(traffic_mbps=get("provision", "traffic_mbps", (7.0, 11.0, 16.0)),
                         wb_ms=get("provision", "wb_ms", (10.0, 20.0)), epsilon=get("provision", "epsilon", 1e-5))
    return ParsedConfig(scenario=scn, provision=prov, source=source, raw=raw)
