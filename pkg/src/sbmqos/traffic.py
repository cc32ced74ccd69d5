"""First-hop arrival process: compound Poisson bursts per slot."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .units import DEFAULT_SLOT_SECONDS, mbps_to_bits_per_slot

BURST_KINDS = ("fixed", "exponential")


@dataclass(frozen=True)
class TrafficConfig:
    """Compound-Poisson arrivals: Poisson(request_rate) bursts per slot.

    The mean burst size is derived as mean_rate_bits_per_slot / request_rate so the
    rate identity holds by construction.
    """

    mean_rate_bits_per_slot: float
    request_rate: float = 1.0
    burst_distribution: str = "fixed"
    seed: int = 0

    def __post_init__(self):
        if not self.mean_rate_bits_per_slot > 0:
            raise ConfigError(f"mean_rate_bits_per_slot must be > 0, got {self.mean_rate_bits_per_slot}")
        if not self.request_rate > 0:
            raise ConfigError(f"request_rate must be > 0, got {self.request_rate}")
        if self.burst_distribution not in BURST_KINDS:
            raise ConfigError(f"burst_distribution must be one of {BURST_KINDS}, got {self.burst_distribution!r}")

    @property
    def mean_burst_bits(self) -> float:
        return self.mean_rate_bits_per_slot / self.request_rate

    @classmethod
    def from_mbps(cls, mbps: float, slot_seconds: float = DEFAULT_SLOT_SECONDS, **kw) -> "TrafficConfig":
        return cls(mean_rate_bits_per_slot=mbps_to_bits_per_slot(mbps, slot_seconds), **kw)


def arrivals_from_rng(cfg: TrafficConfig, horizon: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw arrivals of shape ``size`` (defaults to ``(horizon,)``) from ``rng``."""
    shape = (horizon,) if size is None else size
    counts = rng.poisson(cfg.request_rate, size=shape)
    if cfg.burst_distribution == "fixed":
        return counts.astype(np.int64) * int(np.floor(cfg.mean_burst_bits))
    # Sum of k exponential bursts is Gamma(k); the total is floored to whole bits.
    out = np.zeros(shape, dtype=np.int64)
    busy = counts > 0
    out[busy] = np.floor(rng.gamma(counts[busy], cfg.mean_burst_bits)).astype(np.int64)
    return out


def generate_arrivals(cfg: TrafficConfig, horizon: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Per-slot arrival sizes in whole bits, length ``horizon``.

    Uses ``cfg.seed`` unless an explicit generator is supplied.
    """
    if int(horizon) != horizon or horizon < 1:
        raise ConfigError(f"horizon must be a positive integer, got {horizon}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    return arrivals_from_rng(cfg, int(horizon), rng)
