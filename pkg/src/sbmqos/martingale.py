"""Backlog and sliding block martingales built from trace data.

Rates are estimated empirically. All exponentials are handled in the log domain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientSamplesError, NoBusyPeriodError
from .tandem import QueueTrace
from .units import BIT_SCALE


def log_mean_exp(v: np.ndarray) -> float:
    """ln mean(exp(v)) with a max shift."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise InsufficientSamplesError("log_mean_exp of empty sample", 0)
    m = float(v.max())
    return m + float(np.log(np.mean(np.exp(v - m))))


def window_sums(increments: np.ndarray, wb: int) -> np.ndarray:
    """All overlapping length-``wb`` sums along the last axis, flattened."""
    x = np.asarray(increments, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    c = np.concatenate([np.zeros((x.shape[0], 1)), np.cumsum(x, axis=1)], axis=1)
    return (c[:, wb:] - c[:, :-wb]).ravel()


@dataclass(frozen=True)
class RateFunction:
    """D_X(theta) = (1/theta) ln E[exp(theta (X(t+wb) - X(t)) / wb)]."""

    theta: float
    value: float
    window_wb: int
    sample_count: int


def _check_theta(theta):
    if not theta > 0:
        raise ConfigError(f"theta must be > 0, got {theta}")


def rate_from_window_sums(sums: np.ndarray, theta: float, wb: int) -> RateFunction:
    _check_theta(theta)
    sums = np.asarray(sums, dtype=float).ravel()
    if sums.size == 0:
        raise InsufficientSamplesError("no windows available", 0)
    return RateFunction(theta, log_mean_exp(theta * sums / wb) / theta, int(wb), int(sums.size))


def estimate_rate(process_increments, theta: float, wb: int) -> RateFunction:
    """Rate function from per-slot increments (1-D, or 2-D with one path per row)."""
    _check_theta(theta)
    if wb < 1:
        raise ConfigError(f"wb must be >= 1, got {wb}")
    x = np.asarray(process_increments, dtype=float)
    if x.shape[-1] < wb + 1:
        raise InsufficientSamplesError(f"need at least wb + 1 = {wb + 1} increments", x.shape[-1])
    return rate_from_window_sums(window_sums(x, wb), theta, wb)


@dataclass(frozen=True)
class MartingaleView:
    """M_SB(t) = exp(theta (X(t+wb) - X(t) - wb D_X(theta))) over a cumulative process X."""

    process: np.ndarray
    theta: float
    window_wb: int
    rate: RateFunction

    def log_value(self, t: int) -> float:
        wb = self.window_wb
        if not 0 <= t or t + wb >= len(self.process):
            raise ConfigError(f"slot {t} + wb {wb} beyond process length {len(self.process)}")
        return self.theta * (float(self.process[t + wb] - self.process[t]) - wb * self.rate.value)

    def value(self, t: int) -> float:
        return float(np.exp(self.log_value(t)))

    def log_values(self) -> np.ndarray:
        x = np.asarray(self.process, dtype=float)
        wb = self.window_wb
        return self.theta * (x[wb:] - x[:-wb] - wb * self.rate.value)

    def values(self) -> np.ndarray:
        return np.exp(self.log_values())


def sliding_block_martingale(cumulative, theta: float, wb: int) -> MartingaleView:
    """Sliding block martingale of a cumulative process; X is taken as 0 before index 0."""
    x = np.concatenate([[0.0], np.asarray(cumulative, dtype=float)])
    rate = estimate_rate(np.diff(x), theta, wb)
    return MartingaleView(process=x, theta=float(theta), window_wb=int(wb), rate=rate)


def busy_mask(Q: np.ndarray) -> np.ndarray:
    """Slots with Q(t-1) > 0 and Q(t) > 0."""
    Q = np.asarray(Q)
    prev = np.concatenate([[0], Q[:-1]])
    return (prev > 0) & (Q > 0)


def busy_increments(trace: QueueTrace) -> np.ndarray:
    """q(t) restricted to busy-period slots, concatenated, in bits."""
    return trace.q[busy_mask(trace.Q)]


def backlog_martingale(trace: QueueTrace, theta: float, unit_bits: float = BIT_SCALE) -> MartingaleView:
    """Per-slot (wb = 1) martingale over concatenated busy-period q(t).

    ``theta`` is per ``unit_bits`` bits (per kbit by default).
    """
    q = busy_increments(trace) / unit_bits
    if q.size < 2:
        raise NoBusyPeriodError("trace has no busy period of length >= 2")
    rate = estimate_rate(q, theta, 1)
    return MartingaleView(process=np.concatenate([[0.0], np.cumsum(q)]), theta=float(theta), window_wb=1, rate=rate)


def unit_mean(x: np.ndarray, theta: float, rate_value: float):
    """Sample mean and standard error of exp(theta (x - D))."""
    v = np.exp(theta * (np.asarray(x, dtype=float) - rate_value))
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))
