"""Per-hop service process from TR 38.901 path loss, log-normal shadowing and SINR capacity."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, RangeError
from .units import db_to_linear, dbm_to_mw, linear_to_db

MODELS = ("UMa", "UMi")
LOS_MODES = ("LOS", "NLOS", "probabilistic")
# TR 38.901 writes the breakpoint distance with c = 3.0e8 m/s.
C_BREAKPOINT = 3.0e8
D2D_MIN_M = 10.0
D2D_MAX_M = 5000.0
ENV_HEIGHT_M = 1.0

_MODEL_DEFAULTS = {
    "UMa": dict(bs_height_m=25.0, shadow_sigma_db=8.2),
    "UMi": dict(bs_height_m=10.0, shadow_sigma_db=7.8),
}


@dataclass(frozen=True)
class ChannelConfig:
    """One hop's radio link. ``None`` fields take the model's default."""

    model: str = "UMa"
    link_distance_m: float = 200.0
    carrier_frequency_ghz: float = 28.0
    bs_height_m: Optional[float] = None
    ut_height_m: float = 1.5
    inter_site_distance_m: float = 500.0
    street_width_m: float = 20.0
    building_height_m: float = 20.0
    shadow_sigma_db: Optional[float] = None
    los: str = "LOS"
    tx_power_dbm: float = 30.0
    noise_density_dbm_hz: float = -167.0
    bandwidth_hz: float = 5e6
    interferer_powers_dbm: tuple = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.los not in LOS_MODES:
            raise ConfigError(f"los must be one of {LOS_MODES}, got {self.los!r}")
        for name, value in _MODEL_DEFAULTS[self.model].items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        object.__setattr__(self, "interferer_powers_dbm", tuple(float(p) for p in self.interferer_powers_dbm))
        for name in ("link_distance_m", "carrier_frequency_ghz", "bs_height_m", "ut_height_m",
                     "inter_site_distance_m", "street_width_m", "building_height_m", "bandwidth_hz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.shadow_sigma_db < 0:
            raise ConfigError(f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}")

    def with_(self, **kw) -> "ChannelConfig":
        return replace(self, **kw)


def _breakpoint_m(cfg: ChannelConfig) -> float:
    return 4.0 * (cfg.bs_height_m - ENV_HEIGHT_M) * (cfg.ut_height_m - ENV_HEIGHT_M) \
        * cfg.carrier_frequency_ghz * 1e9 / C_BREAKPOINT


def _pl_los(cfg: ChannelConfig, d2d, d3d):
    fc = cfg.carrier_frequency_ghz
    dbp = _breakpoint_m(cfg)
    dh2 = (cfg.bs_height_m - cfg.ut_height_m) ** 2
    if cfg.model == "UMa":
        near = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc)
        far = 28.0 + 40.0 * np.log10(d3d) + 20.0 * np.log10(fc) - 9.0 * np.log10(dbp ** 2 + dh2)
    else:
        near = 32.4 + 21.0 * np.log10(d3d) + 20.0 * np.log10(fc)
        far = 32.4 + 40.0 * np.log10(d3d) + 20.0 * np.log10(fc) - 9.5 * np.log10(dbp ** 2 + dh2)
    return np.where(d2d <= dbp, near, far)


def _pl_nlos_prime(cfg: ChannelConfig, d3d):
    fc = cfg.carrier_frequency_ghz
    h = cfg.ut_height_m
    if cfg.model == "UMa":
        return 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(fc) - 0.6 * (h - 1.5)
    return 35.3 * np.log10(d3d) + 22.4 + 21.3 * np.log10(fc) - 0.3 * (h - 1.5)


def path_loss_db(cfg: ChannelConfig, distance_m, los: str = "LOS"):
    """TR 38.901 UMa / UMi street-canyon path loss in dB.

    ``distance_m`` is the 2-D ground distance; scalar in, scalar out.
    """
    if los not in ("LOS", "NLOS"):
        raise ConfigError(f"los must be LOS or NLOS, got {los!r}")
    d2d = np.asarray(distance_m, dtype=float)
    if np.any(d2d < D2D_MIN_M) or np.any(d2d > D2D_MAX_M):
        raise RangeError(f"distance {distance_m} m outside validity range [{D2D_MIN_M}, {D2D_MAX_M}] m")
    d3d = np.sqrt(d2d ** 2 + (cfg.bs_height_m - cfg.ut_height_m) ** 2)
    pl = _pl_los(cfg, d2d, d3d)
    if los == "NLOS":
        pl = np.maximum(pl, _pl_nlos_prime(cfg, d3d))
    return float(pl) if pl.ndim == 0 else pl


def los_probability(cfg: ChannelConfig, distance_m: float) -> float:
    """TR 38.901 LOS probability for the configured scenario."""
    d = float(distance_m)
    if cfg.model == "UMi":
        if d <= 18.0:
            return 1.0
        return 18.0 / d + np.exp(-d / 36.0) * (1.0 - 18.0 / d)
    if d <= 18.0:
        return 1.0
    h = cfg.ut_height_m
    c_prime = 0.0 if h <= 13.0 else ((h - 13.0) / 10.0) ** 1.5
    base = 18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d)
    return float(base * (1.0 + c_prime * 1.25 * (d / 100.0) ** 3 * np.exp(-d / 150.0)))


def noise_plus_interference_mw(cfg: ChannelConfig) -> float:
    noise = dbm_to_mw(cfg.noise_density_dbm_hz) * cfg.bandwidth_hz
    return float(noise + np.sum(dbm_to_mw(np.asarray(cfg.interferer_powers_dbm, dtype=float))))


def _mean_snr_db(cfg: ChannelConfig, los: str) -> float:
    """SINR in dB before shadowing."""
    rx = cfg.tx_power_dbm - path_loss_db(cfg, cfg.link_distance_m, los)
    return float(rx - linear_to_db(noise_plus_interference_mw(cfg)))


def capacity_bits(cfg: ChannelConfig, sinr_db, slot_seconds: float):
    """Shannon capacity of one slot in (fractional) bits."""
    return cfg.bandwidth_hz * slot_seconds * np.log2(1.0 + db_to_linear(sinr_db))


def service_from_rng(cfg: ChannelConfig, slot_seconds: float, rng: np.random.Generator, size) -> np.ndarray:
    """Per-slot whole-bit capacities of shape ``size`` with i.i.d. shadowing per slot."""
    shadow = rng.normal(0.0, cfg.shadow_sigma_db, size=size) if cfg.shadow_sigma_db > 0 else np.zeros(size)
    if cfg.los == "probabilistic":
        p = los_probability(cfg, cfg.link_distance_m)
        is_los = rng.random(size=size) < p
        base = np.where(is_los, _mean_snr_db(cfg, "LOS"), _mean_snr_db(cfg, "NLOS"))
    else:
        base = _mean_snr_db(cfg, cfg.los)
    return np.floor(capacity_bits(cfg, base - shadow, slot_seconds)).astype(np.int64)


def draw_service(cfg: ChannelConfig, horizon: int, slot_seconds: float,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Whole-bit service capacity per slot for one hop, length ``horizon``."""
    if int(horizon) != horizon or horizon < 1:
        raise ConfigError(f"horizon must be a positive integer, got {horizon}")
    if not slot_seconds > 0:
        raise ConfigError(f"slot_seconds must be > 0, got {slot_seconds}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    return service_from_rng(cfg, slot_seconds, rng, (int(horizon),))


@dataclass(frozen=True)
class ServiceProcess:
    """Per-hop service capacities, shape (hops, horizon), whole bits."""

    bits: np.ndarray

    @property
    def hops(self) -> int:
        return self.bits.shape[0]

    def __getitem__(self, hop: int) -> np.ndarray:
        return self.bits[hop]


def draw_services(cfgs: Sequence[ChannelConfig], horizon: int, slot_seconds: float) -> ServiceProcess:
    """Independent service sequences, one per hop, each seeded by its own config."""
    return ServiceProcess(np.stack([draw_service(c, horizon, slot_seconds) for c in cfgs]))


def expected_service_bits(cfg: ChannelConfig, slot_seconds: float, nodes: int = 80) -> float:
    """Mean capacity per slot by Gauss-Hermite quadrature over shadowing (before flooring)."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()

    def mean_for(los):
        return float(np.sum(w * capacity_bits(cfg, _mean_snr_db(cfg, los) - cfg.shadow_sigma_db * x, slot_seconds)))

    if cfg.los == "probabilistic":
        p = los_probability(cfg, cfg.link_distance_m)
        return p * mean_for("LOS") + (1 - p) * mean_for("NLOS")
    return mean_for(cfg.los)
