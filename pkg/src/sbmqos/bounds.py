"""Delay unreliability probability bound and its moment ingredients.

Inputs are in bits; theta is per ``unit_bits`` bits (kbit by default).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import ConfigError, InsufficientSamplesError
from .martingale import log_mean_exp
from .tandem import TandemTrace
from .units import BIT_SCALE

MIN_WINDOWS = 100


def xmsb_windows(departures_last: np.ndarray, wb: int) -> np.ndarray:
    """X_msb per window start, shape (R, n - wb).

    Summed backlog minus first-hop arrivals equals minus the last hop's departures, so
    X_msb(t) = -(D(t+wb) - D(t)).
    """
    D = np.atleast_2d(np.asarray(departures_last, dtype=np.int64))
    return -(D[:, wb:] - D[:, :-wb])


def delay_event_process(A1: np.ndarray, departures_last: np.ndarray, wb: int) -> np.ndarray:
    """Y(t) = sum_i Q_i(t+wb) - A1(t+wb) + A1(t) = A1(t) - D(t+wb), shape (R, n - wb)."""
    A = np.atleast_2d(np.asarray(A1, dtype=np.int64))
    D = np.atleast_2d(np.asarray(departures_last, dtype=np.int64))
    return A[:, :-wb] - D[:, wb:]


@dataclass(frozen=True)
class XmsbEstimate:
    theta: float
    log_moment: float
    mean_xmsb: float
    sample_count: int
    wb: int = 0
    std_error: float = float("nan")
    unit_bits: float = BIT_SCALE


def block_log_moment_se(values: np.ndarray, theta: float, block: int) -> float:
    """Standard error of ln mean exp(theta v) from non-overlapping time blocks per path.

    ``values`` is (R, n); overlap-induced correlation is absorbed by the block means.
    """
    v = np.atleast_2d(values)
    block = max(1, int(block))
    nb = v.shape[1] // block
    if nb == 0 or v.shape[0] * nb < 2:
        return float("nan")
    z = theta * v[:, : nb * block]
    m = float(z.max())
    e = np.exp(z - m).reshape(v.shape[0], nb, block).mean(axis=2).ravel()
    mean = e.mean()
    return float(e.std(ddof=1) / np.sqrt(e.size) / mean) if mean > 0 else float("inf")


def xmsb_from_windows(windows: np.ndarray, theta: float, wb: int, unit_bits: float = BIT_SCALE) -> XmsbEstimate:
    if not theta > 0:
        raise ConfigError(f"theta must be > 0, got {theta}")
    w = np.atleast_2d(windows) / unit_bits
    if w.size < MIN_WINDOWS:
        raise InsufficientSamplesError(f"need at least {MIN_WINDOWS} X_msb windows", int(w.size))
    return XmsbEstimate(theta=float(theta), log_moment=log_mean_exp(theta * w), mean_xmsb=float(w.mean()),
                        sample_count=int(w.size), wb=int(wb), std_error=block_log_moment_se(w, theta, wb),
                        unit_bits=unit_bits)


def _stack(traces: Iterable[TandemTrace], start: int):
    traces = list(traces)
    if not traces:
        raise ConfigError("need at least one trace")
    A1 = np.stack([tr.A1[start:] for tr in traces])
    D = np.stack([tr.departures_last[start:] for tr in traces])
    return A1, D


def estimate_xmsb(traces: Iterable[TandemTrace], theta: float, wb: int, start: int = 0,
                  unit_bits: float = BIT_SCALE) -> XmsbEstimate:
    """Pooled estimate over every window starting at or after ``start`` in every trace."""
    if wb < 1:
        raise ConfigError(f"wb must be >= 1, got {wb}")
    _, D = _stack(traces, start)
    if D.shape[1] <= wb:
        raise InsufficientSamplesError("traces too short for one window", 0)
    return xmsb_from_windows(xmsb_windows(D, wb), theta, wb, unit_bits)


@dataclass(frozen=True)
class DupbResult:
    theta: float
    wb: int
    total_backlog_at_t: float
    bound: float
    raw_bound: float
    xmsb: XmsbEstimate
    diagnostics: dict = field(default_factory=dict)


def dupb_from_estimate(xmsb: XmsbEstimate, total_backlog_at_t: float,
                       backlog_log_factor: Optional[float] = None, diagnostics: Optional[dict] = None) -> DupbResult:
    """bound = E[e^{theta X_msb}] e^{theta sum Q_i(t)}, reported clamped at 1.

    ``backlog_log_factor`` overrides theta * backlog, e.g. with ln mean exp(theta Q_r)
    for bounds conditioned per realization.
    """
    log_backlog = xmsb.theta * total_backlog_at_t / xmsb.unit_bits if backlog_log_factor is None \
        else backlog_log_factor
    raw = float(np.exp(xmsb.log_moment + log_backlog))
    return DupbResult(theta=xmsb.theta, wb=xmsb.wb, total_backlog_at_t=float(total_backlog_at_t),
                      bound=min(raw, 1.0), raw_bound=raw, xmsb=xmsb, diagnostics=dict(diagnostics or {}))


def dupb(traces: Iterable[TandemTrace], theta: float, wb: int, total_backlog_at_t: float, start: int = 0,
         unit_bits: float = BIT_SCALE) -> DupbResult:
    return dupb_from_estimate(estimate_xmsb(traces, theta, wb, start, unit_bits), total_backlog_at_t)


def deviations(bound, empirical) -> np.ndarray:
    return np.asarray(bound, dtype=float) - np.asarray(empirical, dtype=float)


def rmse(bound, empirical) -> float:
    d = deviations(bound, empirical)
    return float(np.sqrt(np.mean(d ** 2)))
