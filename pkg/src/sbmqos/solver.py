"""Upcrossing-based occurrence rate and the decay-parameter solve.

Analysis quantities (Y, window sums, backlog) are in ``unit_bits`` units (kbit by
default) and theta is per unit.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .bounds import delay_event_process, xmsb_windows
from .errors import ConfigError, InfeasibleError, UnstableScenarioError
from .martingale import log_mean_exp, window_sums
from .tandem import TandemTrace
from .units import BIT_SCALE

THETA_MIN = 1e-8
THETA_MAX = 10.0
REL_TOL = 1e-6
PROFILE_POINTS = 20


def count_exceedances(y, a: float) -> int:
    """Number of indices with y_t > a."""
    y = np.asarray(y)
    if y.size == 0:
        raise ConfigError("count_exceedances needs a nonempty sequence")
    return int(np.count_nonzero(y > a))


def _as_rows(y_samples) -> list:
    if isinstance(y_samples, np.ndarray):
        return [np.asarray(r, dtype=float) for r in np.atleast_2d(y_samples)]
    return [np.asarray(r, dtype=float).ravel() for r in y_samples]


def mean_abs_increment(rows) -> float:
    """delta = mean |Y_t - Y_{t-1}|, differences taken within each sequence."""
    tot, n = 0.0, 0
    for r in rows:
        if r.size > 1:
            d = np.abs(np.diff(r))
            tot += float(d.sum())
            n += d.size
    if n == 0:
        raise ConfigError("need sequences of length >= 2 to measure increments")
    return tot / n


def mean_drift(rows):
    """Per-sequence average increment; returns (mean, standard error across sequences)."""
    rates = np.array([(r[-1] - r[0]) / (r.size - 1) for r in rows if r.size > 1])
    if rates.size == 0:
        return 0.0, float("inf")
    se = float(rates.std(ddof=1) / np.sqrt(rates.size)) if rates.size > 1 else float("inf")
    return float(rates.mean()), se


@dataclass(frozen=True)
class UpcrossingPartition:
    a: float
    delta: float
    sb_seg: int
    sub_intervals: tuple

    @property
    def floors(self) -> np.ndarray:
        return self.a + self.delta * np.arange(self.sb_seg)


def build_partition(y_max: float, a: float, delta: float) -> UpcrossingPartition:
    if y_max <= a:
        return UpcrossingPartition(a=float(a), delta=float(delta), sb_seg=0, sub_intervals=())
    if not delta > 0:
        raise ConfigError("sequence exceeds a but has zero mean absolute increment")
    seg = int(math.ceil((y_max - a) / delta))
    floors = a + delta * np.arange(seg)
    return UpcrossingPartition(a=float(a), delta=float(delta), sb_seg=seg,
                               sub_intervals=tuple((float(l), float(l + delta)) for l in floors))


def sum_negative_parts(sorted_y: np.ndarray, prefix: np.ndarray, floors: np.ndarray) -> np.ndarray:
    """sum_t (Y_t - c)^- for each c, via a sorted sample and its prefix sums."""
    k = np.searchsorted(sorted_y, floors, side="left")
    return k * floors - prefix[k]


def _partition_and_total(rows, a: float):
    delta = mean_abs_increment(rows)
    flat = np.concatenate(rows)
    part = build_partition(float(flat.max()), a, delta)
    if part.sb_seg == 0:
        return part, 0.0, flat.size
    ys = np.sort(flat)
    prefix = np.concatenate([[0.0], np.cumsum(ys)])
    neg = sum_negative_parts(ys, prefix, part.floors) / flat.size
    return part, float(np.sum(2.0 * neg / delta)), flat.size


def upcrossing_bound(y_samples, a: float) -> float:
    """Sum over width-delta sub-intervals of 2 E[(Y - sb_l)^-] / delta.

    E is the sample mean pooled over time and sequences. Warns when the samples drift
    upward, since the bound presumes a supermartingale.
    """
    rows = _as_rows(y_samples)
    drift, se = mean_drift(rows)
    if drift > 0 and drift > 3 * se:
        warnings.warn(f"samples drift upward ({drift:.4g} per step, se {se:.2g}); not a supermartingale")
    return _partition_and_total(rows, a)[1]


@dataclass(frozen=True)
class OccurrenceProfile:
    mr: float
    partition: UpcrossingPartition
    frequency_nonnegative: float
    drift: float
    drift_se: float
    observations: int


def occurrence_profile(y: np.ndarray, unit_bits: float = BIT_SCALE, check_drift: bool = True) -> OccurrenceProfile:
    """Maximum occurrence rate of {Y >= 0} from delay-event paths ``y`` (bits, one path per row).

    The count bound is normalized by the pooled number of observations, so mr is a
    per-observation rate.
    """
    rows = _as_rows(np.atleast_2d(y) / unit_bits)
    drift, se = mean_drift(rows)
    delta = mean_abs_increment(rows)
    if check_drift and drift > 0 and drift > max(3 * se, 0.01 * delta):
        raise UnstableScenarioError(
            f"delay-event process drifts upward by {drift:.4g} per slot (se {se:.2g}); scenario is not stable")
    part, total, n = _partition_and_total(rows, 0.0)
    flat = np.concatenate(rows)
    return OccurrenceProfile(mr=total / n, partition=part, frequency_nonnegative=float(np.mean(flat >= 0)),
                             drift=drift, drift_se=se, observations=int(n))


def _stack(traces: Iterable[TandemTrace], start: int):
    traces = list(traces)
    if not traces:
        raise ConfigError("need at least one trace")
    return traces, np.stack([t.A1[start:] for t in traces]), np.stack([t.departures_last[start:] for t in traces])


def max_occurrence_rate(traces: Iterable[TandemTrace], wb: int, start: int = 0) -> float:
    _, A1, D = _stack(traces, start)
    return occurrence_profile(delay_event_process(A1, D, wb)).mr


@dataclass
class SolverInputs:
    """Everything the theta solve needs at one window length (analysis units)."""

    wb: int
    arrival_sums: np.ndarray
    backlog_sums: list
    backlog: float
    mean_xmsb: float
    mr: float

    def steady_state_slack(self, theta: float) -> float:
        """W D_A1(theta) - sum_i W D_Qi(theta) - sum_i Q_i(t); feasible when >= 0."""
        wb = self.wb

        def wd(sums):
            return wb * log_mean_exp(theta * sums / wb) / theta

        return wd(self.arrival_sums) - sum(wd(s) for s in self.backlog_sums) - self.backlog

    @property
    def theta_cap(self) -> float:
        denom = self.mean_xmsb + self.backlog
        if not (0 < self.mr <= 1) or not denom < 0:
            return float("nan")
        return math.log(self.mr) / denom


@dataclass(frozen=True)
class ThetaSolution:
    theta: float
    mr: float
    theta_cap: float
    iterations: int
    bracket_initial: tuple
    bracket_final: tuple
    wall_time: float
    capped: bool
    fallback_reason: str = ""
    slack: float = float("nan")
    profile: tuple = field(default_factory=tuple)
    single_crossing: bool = True


def slack_profile(inputs: SolverInputs, lo: float = THETA_MIN, hi: float = THETA_MAX, points: int = PROFILE_POINTS):
    grid = np.geomspace(lo, hi, points)
    return tuple((float(t), float(inputs.steady_state_slack(t))) for t in grid)


def _single_crossing(profile) -> bool:
    feasible = [g >= 0 for _, g in profile]
    # Feasible points must form a prefix of the grid.
    return all(not (b and not a) for a, b in zip(feasible, feasible[1:]))


def bisect_sup(slack, lo: float, hi: float, tol: float = REL_TOL):
    """Largest theta in [lo, hi] with slack(theta) >= 0; returns (theta, evaluations, final bracket).

    The upper end is tested first, then the lower end; bisection continues until the
    bracket is within ``tol`` relative to its upper end.
    """
    evals = 1
    if slack(hi) >= 0:
        return hi, evals, (hi, hi)
    evals += 1
    if slack(lo) < 0:
        return None, evals, (lo, hi)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        evals += 1
        if slack(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo, evals, (lo, hi)


def solve_theta_inputs(inputs: SolverInputs, use_cap: bool = True, bracket=(THETA_MIN, THETA_MAX),
                       tol: float = REL_TOL, profile: bool = True) -> ThetaSolution:
    """sup{theta <= cap : steady-state slack >= 0} by bisection; iterations = slack evaluations."""
    t0 = time.perf_counter()
    lo, hi = float(bracket[0]), float(bracket[1])
    cap = inputs.theta_cap
    reason = ""
    capped = False
    if use_cap:
        if math.isnan(cap):
            reason = f"cap undefined (mr={inputs.mr:.4g}, E[X_msb]+backlog={inputs.mean_xmsb + inputs.backlog:.4g})"
        elif cap <= lo:
            reason = f"cap {cap:.4g} below theta_min {lo:.4g}"
        else:
            hi, capped = cap, True
    theta, evals, final = bisect_sup(inputs.steady_state_slack, lo, hi, tol)
    wall = time.perf_counter() - t0
    prof = slack_profile(inputs, bracket[0], max(bracket[1], hi)) if profile else ()
    if theta is None:
        raise InfeasibleError(f"no theta in [{lo:.3g}, {hi:.3g}] satisfies the steady-state condition "
                              f"at wb={inputs.wb}", profile=prof)
    return ThetaSolution(theta=float(theta), mr=float(inputs.mr), theta_cap=float(cap), iterations=evals,
                         bracket_initial=(float(bracket[0]), float(hi)), bracket_final=tuple(map(float, final)),
                         wall_time=wall, capped=capped, fallback_reason=reason,
                         slack=float(inputs.steady_state_slack(theta)), profile=prof,
                         single_crossing=_single_crossing(prof) if prof else True)


def inputs_from_traces(traces: Sequence[TandemTrace], wb: int, t: int, start: int = 0,
                       unit_bits: float = BIT_SCALE) -> SolverInputs:
    """Solver inputs from full traces: windows from ``start`` on, backlog averaged at slot ``t``."""
    traces, A1, D = _stack(traces, start)
    arrivals = np.stack([tr.per_hop[0].a[start:] for tr in traces]) / unit_bits
    backlog_sums = []
    for h in range(traces[0].hops):
        Q = np.stack([tr.per_hop[h].Q[start:] for tr in traces]) / unit_bits
        backlog_sums.append((Q[:, wb:] - Q[:, :-wb]).ravel())
    backlog = float(np.mean([tr.total_backlog[t] for tr in traces])) / unit_bits
    return SolverInputs(wb=wb, arrival_sums=window_sums(arrivals, wb), backlog_sums=backlog_sums, backlog=backlog,
                        mean_xmsb=float(xmsb_windows(D, wb).mean()) / unit_bits,
                        mr=occurrence_profile(delay_event_process(A1, D, wb), unit_bits).mr)


def solve_theta(traces: Sequence[TandemTrace], wb: int, t: Optional[int] = None, start: int = 0,
                use_cap: bool = True, **kw) -> ThetaSolution:
    traces = list(traces)
    if t is None:
        t = traces[0].horizon // 2
    return solve_theta_inputs(inputs_from_traces(traces, wb, t, start), use_cap=use_cap, **kw)
