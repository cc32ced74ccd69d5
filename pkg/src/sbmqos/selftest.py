"""Property suites shared by the ``selftest`` subcommand and the acceptance tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, draw_service
from .martingale import busy_increments, estimate_rate, unit_mean
from .solver import count_exceedances, upcrossing_bound
from .tandem import queue_trace
from .traffic import TrafficConfig, generate_arrivals
from .units import BIT_SCALE


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def negative_drift_walk(rng: np.random.Generator, drift: float, T: int, kind: str,
                        sigma_range=(0.5, 1.5)) -> np.ndarray:
    """Y_1..Y_T of a walk from 0 with mean step ``drift`` and roughly unit step scale.

    Dominance of the count bound is not universal: with step deviation well above the
    drift scale (sigma >= 2 at these drifts and horizons) a walk can sit above ``a`` for
    most of its horizon while the pooled negative parts stay small.
    """
    if kind == "gauss":
        steps = rng.normal(drift, rng.uniform(*sigma_range), T)
    elif kind == "pm1":
        p_up = (1 + drift) / 2
        steps = np.where(rng.random(T) < p_up, 1.0, -1.0)
    else:  # exponential jumps up, unit drift down
        steps = rng.exponential(1.0, T) - (1.0 - drift)
    return np.cumsum(steps)


def upcrossing_suite(instances: int = 1000, seed: int = 2024, a: float = 0.0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(instances):
        drift = rng.uniform(-0.5, -0.05)
        T = int(rng.integers(1000, 10_001))
        kind = ("gauss", "pm1", "exp")[i % 3]
        y = negative_drift_walk(rng, drift, T, kind)
        count, bound = count_exceedances(y, a), upcrossing_bound([y], a)
        out.append(CheckResult(f"walk[{i}] {kind} drift={drift:.3f} T={T}", count <= bound,
                               f"O_T={count} bound={bound:.2f}"))
    return out


def unit_mean_suite(thetas=(1e-4, 1e-3, 1e-2), n: int = 100_000, seed: int = 7) -> list:
    """exp(theta (x - D)) has unit mean within 3 standard errors, D fitted on a held-out half."""
    T = 4 * n
    a = generate_arrivals(TrafficConfig(9500.0, seed=seed), T)
    s = draw_service(ChannelConfig("UMa", link_distance_m=250, bandwidth_hz=4.5e6, interferer_powers_dbm=(-95,),
                                   seed=seed + 1), T, 0.5e-3)
    busy = busy_increments(queue_trace(a, s)) / BIT_SCALE
    series = {"arrivals": a[: 2 * n] / BIT_SCALE, "busy q": busy[: 2 * n]}
    out = []
    for name, x in series.items():
        fit, test = x[: x.size // 2], x[x.size // 2:]
        for theta in thetas:
            D = estimate_rate(fit, theta, 1).value
            m, se = unit_mean(test, theta, D)
            out.append(CheckResult(f"unit mean {name} theta={theta:g}/kbit", abs(m - 1) <= 3 * se,
                                   f"mean={m:.6f} se={se:.2e} n={test.size}"))
    return out
