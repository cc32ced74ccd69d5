"""Minimum per-hop service rate meeting a (W^b, epsilon) delay target."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .bounds import XmsbEstimate
from .errors import ConfigError
from .units import DEFAULT_SLOT_SECONDS


@dataclass(frozen=True)
class QosTarget:
    wb: int
    epsilon: float
    slot_seconds: float = DEFAULT_SLOT_SECONDS

    def __post_init__(self):
        if int(self.wb) != self.wb or self.wb < 1:
            raise ConfigError(f"wb must be an integer >= 1, got {self.wb}")
        if not 0 < self.epsilon < 1:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def wb_ms(self) -> float:
        return self.wb * self.slot_seconds * 1e3


# Branch labels recorded on every result.
DIRECT = "direct"        # raw value already at or above the mean arrival rate
MAGNITUDE = "magnitude"  # raw value negative; its magnitude exceeds the mean arrival rate
FLOOR = "floor"          # clamped up to the mean arrival rate


@dataclass(frozen=True)
class ProvisionResult:
    c_bits_per_slot: float
    theta: float
    implied_backlog: float
    mean_arrival_rate: float
    raw_c_bits_per_slot: float
    branch: str


def minimum_service_rate(xmsb: XmsbEstimate, target: QosTarget, theta: float,
                         mean_arrival_rate: float) -> ProvisionResult:
    """C = (1 / (theta W^b)) ln(epsilon / E[e^{theta X_msb}]) with the sign and floor rules.

    The backlog solving bound = epsilon is sum Q = ln(epsilon / E[e^{theta X}]) / theta, and
    C = sum Q / W^b. A negative raw value is replaced by its magnitude; the result is
    then floored at ``mean_arrival_rate`` (bits/slot). Every branch is recorded.
    """
    if not theta > 0:
        raise ConfigError(f"theta must be > 0, got {theta}")
    if xmsb.wb and xmsb.wb != target.wb:
        raise ConfigError(f"X_msb estimated at wb={xmsb.wb} but target has wb={target.wb}")
    backlog_units = (math.log(target.epsilon) - xmsb.log_moment) / theta
    implied_backlog = backlog_units * xmsb.unit_bits
    raw = implied_backlog / target.wb
    c, branch = raw, DIRECT
    if raw < 0:
        c, branch = -raw, MAGNITUDE
    if c < mean_arrival_rate:
        c, branch = float(mean_arrival_rate), FLOOR
    return ProvisionResult(c_bits_per_slot=float(c), theta=float(theta), implied_backlog=float(implied_backlog),
                           mean_arrival_rate=float(mean_arrival_rate), raw_c_bits_per_slot=float(raw), branch=branch)
