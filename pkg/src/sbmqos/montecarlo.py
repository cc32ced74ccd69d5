"""Experiment harness: many independent realizations, bound vs. empirical comparison."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import bounds as bnd
from .channel import ChannelConfig, expected_service_bits, service_from_rng
from .errors import ConfigError, SbmError
from .martingale import log_mean_exp
from .seeding import TRAFFIC_TAG, channel_tag, make_rng
from .solver import (REL_TOL, THETA_MAX, THETA_MIN, SolverInputs, ThetaSolution, occurrence_profile,
                     solve_theta_inputs)
from .tandem import TandemTrace, batch_delays, exceedance_probabilities, hop_departures, lindley, simulate
from .traffic import TrafficConfig, arrivals_from_rng
from .units import BIT_SCALE, DEFAULT_SLOT_SECONDS

THETA_MODES = ("per_wb", "fixed")
BACKLOG_MODES = ("mean", "conditional")
EVENT_MODES = ("strict", "inclusive")


@dataclass(frozen=True)
class Scenario:
    id: str
    hops: int
    traffic: TrafficConfig
    channels: tuple
    horizon: int
    warmup: int
    analysis_slot: int
    wb_grid: tuple
    epsilon: float = 1e-5
    realizations: int = 100_000
    master_seed: int = 0
    slot_seconds: float = DEFAULT_SLOT_SECONDS
    estimation_fraction: float = 0.2
    theta_mode: str = "per_wb"
    fixed_theta: Optional[float] = None
    backlog_mode: str = "mean"
    # Empirical event compared with the bound: W > W^b ("strict") or W >= W^b.
    event: str = "strict"
    block_size: int = 500
    batches: int = 10
    theta_min: float = THETA_MIN
    theta_max: float = THETA_MAX
    solver_tol: float = REL_TOL

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "wb_grid", tuple(int(w) for w in self.wb_grid))
        checks = [
            (1 <= self.hops <= 16, "hops", f"hops must lie in [1, 16], got {self.hops}"),
            (len(self.channels) == self.hops, "channels",
             f"need one channel per hop: {self.hops} hops, {len(self.channels)} channels"),
            (len(self.wb_grid) > 0 and min(self.wb_grid) >= 1, "wb_grid", "wb_grid must be nonempty with entries >= 1"),
            (self.analysis_slot >= self.warmup, "analysis_slot",
             f"analysis_slot ({self.analysis_slot}) must be >= warmup ({self.warmup})"),
            (self.warmup >= 0, "warmup", "warmup must be >= 0"),
            (self.horizon >= self.analysis_slot + 4 * max(self.wb_grid or (0,)), "horizon",
             f"horizon ({self.horizon}) must be >= analysis_slot + 4*max(wb_grid) "
             f"({self.analysis_slot + 4 * max(self.wb_grid or (0,))})"),
            (self.realizations >= 100, "realizations", f"realizations must be >= 100, got {self.realizations}"),
            (0 < self.epsilon < 1, "epsilon", f"epsilon must lie in (0, 1), got {self.epsilon}"),
            (0 < self.estimation_fraction < 1, "estimation_fraction", "estimation_fraction must lie in (0, 1)"),
            (self.theta_mode in THETA_MODES, "theta_mode", f"theta_mode must be one of {THETA_MODES}"),
            (self.backlog_mode in BACKLOG_MODES, "backlog_mode", f"backlog_mode must be one of {BACKLOG_MODES}"),
            (self.event in EVENT_MODES, "event", f"event must be one of {EVENT_MODES}"),
            (self.fixed_theta is None or self.fixed_theta > 0, "fixed_theta", "fixed_theta must be > 0"),
            (0 < self.theta_min < self.theta_max, "theta_min", "need 0 < theta_min < theta_max"),
            (self.block_size >= 1 and self.batches >= 1, "block_size", "block_size and batches must be >= 1"),
        ]
        for ok, key, msg in checks:
            if not ok:
                err = ConfigError(msg)
                err.key = key
                raise err

    @property
    def n_estimation(self) -> int:
        return max(1, int(round(self.realizations * self.estimation_fraction)))

    @property
    def n_evaluation(self) -> int:
        return self.realizations - self.n_estimation

    def with_hops(self, hops: int) -> "Scenario":
        """Same scenario with ``hops`` hops; extra hops replicate the last channel."""
        ch = list(self.channels[:hops])
        while len(ch) < hops:
            ch.append(self.channels[-1])
        return replace(self, hops=hops, channels=tuple(ch), id=f"{self.id.split('@')[0]}@{hops}hop")

    def mean_service_bits(self) -> list:
        return [expected_service_bits(c, self.slot_seconds) for c in self.channels]


# ---------------------------------------------------------------- simulation


def _draw_block(scn: Scenario, lo: int, hi: int):
    """Arrivals (n, H) and services (hops, n, H) for realizations lo..hi-1."""
    H = scn.horizon
    a = np.empty((hi - lo, H), dtype=np.int64)
    s = np.empty((scn.hops, hi - lo, H), dtype=np.int64)
    for k, r in enumerate(range(lo, hi)):
        a[k] = arrivals_from_rng(scn.traffic, H, make_rng(scn.master_seed, r, TRAFFIC_TAG))
        for h, ch in enumerate(scn.channels):
            s[h, k] = service_from_rng(ch, scn.slot_seconds, make_rng(scn.master_seed, r, channel_tag(h)), (H,))
    return a, s


def simulate_realization(scn: Scenario, index: int) -> TandemTrace:
    a, s = _draw_block(scn, index, index + 1)
    return simulate(scn.hops, a[0], [s[h, 0] for h in range(scn.hops)])


def _cascade(a: np.ndarray, s: np.ndarray, keep_backlog: bool):
    """Run the tandem on a block; returns (A1, D_last, per-hop Q or None)."""
    A1 = np.cumsum(a, axis=1)
    Qs = []
    for h in range(s.shape[0]):
        Q = lindley(a, s[h])
        a = hop_departures(a, Q)
        if keep_backlog:
            Qs.append(Q)
    return A1, np.cumsum(a, axis=1), Qs


def rate_stride(wb: int) -> int:
    """Start spacing of the windows used for rate-function estimates."""
    return max(1, wb // 2)


def _estimation_block(scn: Scenario, lo: int, hi: int) -> dict:
    a, s = _draw_block(scn, lo, hi)
    A1, D, Qs = _cascade(a, s, keep_backlog=True)
    w0, t = scn.warmup, scn.analysis_slot
    out = {
        "A1": _compact(A1[:, w0:]),
        "D": _compact(D[:, w0:]),
        "backlog_t": (A1[:, t] - D[:, t]).astype(np.int64),
        "arrival_sums": {},
        "backlog_sums": {},
    }
    for wb in scn.wb_grid:
        st = rate_stride(wb)
        out["arrival_sums"][wb] = _strided_diffs(_from(A1, w0), wb, st)
        out["backlog_sums"][wb] = [_strided_diffs(_from(Q, w0), wb, st) for Q in Qs]
    return out


def _compact(x: np.ndarray) -> np.ndarray:
    """int32 copy when values fit, to halve estimation-set memory."""
    return x.astype(np.int32) if x.size and x.max() < 2 ** 31 - 1 and x.min() > -2 ** 31 else x.copy()


def _from(cum: np.ndarray, w0: int) -> np.ndarray:
    """Cumulative values from slot w0 - 1 on (a zero column stands in for slot -1)."""
    if w0 > 0:
        return cum[:, w0 - 1:]
    return np.concatenate([np.zeros((cum.shape[0], 1), cum.dtype), cum], axis=1)


def _strided_diffs(cum: np.ndarray, wb: int, stride: int) -> np.ndarray:
    """X(t + wb) - X(t) for t = 0, stride, 2 stride, ... in analysis units, as float32."""
    starts = np.arange(0, cum.shape[1] - wb, stride)
    return ((cum[:, starts + wb] - cum[:, starts]) / BIT_SCALE).astype(np.float32).ravel()


def _evaluation_block(scn: Scenario, lo: int, hi: int) -> dict:
    a, s = _draw_block(scn, lo, hi)
    A1, D, _ = _cascade(a, s, keep_backlog=False)
    t = scn.analysis_slot
    delays, censored = batch_delays(A1[:, t], D[:, t:])
    y_nonneg = np.stack([A1[:, t] - D[:, t + wb] >= 0 for wb in scn.wb_grid], axis=1)
    return {"delays": delays, "censored": censored, "y_nonneg": y_nonneg,
            "backlog_t": (A1[:, t] - D[:, t]).astype(np.int64)}


def _run_block(args):
    scn, role, lo, hi = args
    return (_estimation_block if role == "est" else _evaluation_block)(scn, lo, hi)


def _blocks(scn: Scenario):
    n_est = scn.n_estimation
    jobs = []
    for role, lo, hi in (("est", 0, n_est), ("eval", n_est, scn.realizations)):
        for b in range(lo, hi, scn.block_size):
            jobs.append((scn, role, b, min(hi, b + scn.block_size)))
    return jobs


def default_workers() -> int:
    return os.cpu_count() or 1


def _map_jobs(jobs, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_block(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_block, jobs))  # map preserves job order


def _map_blocks(scn: Scenario, workers: int):
    jobs = _blocks(scn)
    results = _map_jobs(jobs, workers)
    est = [r for j, r in zip(jobs, results) if j[1] == "est"]
    ev = [r for j, r in zip(jobs, results) if j[1] == "eval"]
    return est, ev


# ---------------------------------------------------------------- reporting


@dataclass(frozen=True)
class ReportRow:
    wb: int
    wb_ms: float
    theta: float
    bound: float
    raw_bound: float
    empirical: float
    empirical_inclusive: float
    ci_upper: float
    ci_lower: float
    deviation: float
    frequency_y: float
    mr: float
    theta_cap: float
    iterations: int
    iterations_uncapped: int
    wall_time: float
    wall_time_uncapped: float
    log_moment: float
    log_moment_se: float
    mean_xmsb: float
    backlog: float
    capped: bool
    fallback_reason: str
    single_crossing: bool


@dataclass(frozen=True)
class ComparisonReport:
    scenario_id: str
    hops: int
    rows: tuple
    max_deviation: float
    rmse: float
    censored: int
    realizations: int
    n_estimation: int
    n_evaluation: int
    batch_quantiles: tuple
    solutions: tuple = field(default_factory=tuple)
    tail_ratio: float = float("nan")

    @property
    def wb(self):
        return np.array([r.wb for r in self.rows])

    @property
    def bound(self):
        return np.array([r.bound for r in self.rows])

    @property
    def empirical(self):
        return np.array([r.empirical for r in self.rows])


def binomial_upper(k: int, n: int, level: float = 0.99) -> float:
    """Clopper-Pearson upper limit of a two-sided ``level`` interval."""
    if k >= n:
        return 1.0
    return float(stats.beta.ppf(1 - (1 - level) / 2, k + 1, n - k))


def binomial_lower(k: int, n: int, level: float = 0.99) -> float:
    """Clopper-Pearson lower limit of a two-sided ``level`` interval."""
    if k <= 0:
        return 0.0
    return float(stats.beta.ppf((1 - level) / 2, k, n - k + 1))


def _concat(blocks, key):
    return np.concatenate([b[key] for b in blocks])


def solver_inputs_for(est: list, wb: int, backlog_units: float, mr: float, mean_x: float) -> SolverInputs:
    hops = len(est[0]["backlog_sums"][wb])
    return SolverInputs(
        wb=wb,
        arrival_sums=np.concatenate([b["arrival_sums"][wb] for b in est]).astype(np.float64),
        backlog_sums=[np.concatenate([b["backlog_sums"][wb][h] for b in est]).astype(np.float64) for h in range(hops)],
        backlog=backlog_units, mean_xmsb=mean_x, mr=mr)


@dataclass
class WindowFit:
    """Estimation-side results at one window length."""

    wb: int
    profile: object
    solution: ThetaSolution
    solution_uncapped: ThetaSolution
    xmsb_windows: np.ndarray
    backlog: float  # mean summed backlog at the analysis slot, bits


@dataclass
class ScenarioFit:
    fits: list
    mean_arrival_bits: float
    backlog_samples: np.ndarray

    def theta_for(self, scn: Scenario, i: int) -> float:
        if scn.fixed_theta is not None:
            return scn.fixed_theta
        if scn.theta_mode == "fixed":
            return self.fits[0].solution.theta
        return self.fits[i].solution.theta


def fit_blocks(scn: Scenario, est: list) -> ScenarioFit:
    """Occurrence rate, theta solves and X_msb windows per grid point."""
    A1 = np.concatenate([b["A1"] for b in est]).astype(np.int64)
    D = np.concatenate([b["D"] for b in est]).astype(np.int64)
    backlog_est = _concat(est, "backlog_t")
    q_bar = float(backlog_est.mean()) / BIT_SCALE
    fits = []
    for wb in scn.wb_grid:
        prof = occurrence_profile(bnd.delay_event_process(A1, D, wb))
        xw = bnd.xmsb_windows(D, wb)
        inputs = solver_inputs_for(est, wb, q_bar, prof.mr, float(xw.mean()) / BIT_SCALE)
        bracket = (scn.theta_min, scn.theta_max)
        sol = solve_theta_inputs(inputs, True, bracket, scn.solver_tol)
        sol_u = solve_theta_inputs(inputs, False, bracket, scn.solver_tol, profile=False)
        fits.append(WindowFit(wb, prof, sol, sol_u, xw, q_bar * BIT_SCALE))
    mean_arrival = float(A1[:, -1].astype(float).sum() - A1[:, 0].astype(float).sum()) / (A1.shape[0] * (A1.shape[1] - 1))
    return ScenarioFit(fits, mean_arrival, backlog_est)


def analyze_blocks(scn: Scenario, est: list, ev: list) -> ComparisonReport:
    fit = fit_blocks(scn, est)
    delays, censored = _concat(ev, "delays"), _concat(ev, "censored")
    y_nonneg = _concat(ev, "y_nonneg")
    backlog_ev = _concat(ev, "backlog_t")
    n_ev = delays.size
    strict = scn.event == "strict"
    emp = exceedance_probabilities(delays, censored, scn.wb_grid, strict=strict)
    emp_incl = exceedance_probabilities(delays, censored, scn.wb_grid, strict=False)
    counts = np.rint(emp * n_ev).astype(int)

    rows = []
    for i, f in enumerate(fit.fits):
        wb, sol, sol_u = f.wb, f.solution, f.solution_uncapped
        theta = fit.theta_for(scn, i)
        est_x = bnd.xmsb_from_windows(f.xmsb_windows, theta, wb)
        if scn.backlog_mode == "conditional":
            # Average of per-realization bounds, each clamped at 1, over the evaluation set.
            logs = est_x.log_moment + theta * backlog_ev / BIT_SCALE
            raw = float(np.exp(log_mean_exp(logs)))
            bound = float(np.mean(np.exp(np.minimum(logs, 0.0))))
        else:
            res = bnd.dupb_from_estimate(est_x, f.backlog)
            raw, bound = res.raw_bound, res.bound
        rows.append(ReportRow(
            wb=wb, wb_ms=wb * scn.slot_seconds * 1e3, theta=float(theta), bound=bound, raw_bound=raw,
            empirical=float(emp[i]), empirical_inclusive=float(emp_incl[i]),
            ci_upper=binomial_upper(int(counts[i]), n_ev), ci_lower=binomial_lower(int(counts[i]), n_ev),
            deviation=float(bound - emp[i]),
            frequency_y=float(y_nonneg[:, i].mean()), mr=f.profile.mr, theta_cap=sol.theta_cap,
            iterations=sol.iterations, iterations_uncapped=sol_u.iterations, wall_time=sol.wall_time,
            wall_time_uncapped=sol_u.wall_time, log_moment=est_x.log_moment, log_moment_se=est_x.std_error,
            mean_xmsb=est_x.mean_xmsb, backlog=f.backlog, capped=sol.capped,
            fallback_reason=sol.fallback_reason, single_crossing=sol.single_crossing))

    dev = np.array([r.deviation for r in rows])
    quant = np.array([exceedance_probabilities(cd, cc, scn.wb_grid, strict=strict)
                      for cd, cc in zip(np.array_split(delays, scn.batches), np.array_split(censored, scn.batches))])
    qs = tuple(tuple(float(v) for v in np.quantile(quant[:, i], [0.0, 0.25, 0.5, 0.75, 1.0]))
               for i in range(len(scn.wb_grid)))
    last = rows[-1]
    return ComparisonReport(
        scenario_id=scn.id, hops=scn.hops, rows=tuple(rows), max_deviation=float(np.max(np.abs(dev))),
        rmse=float(np.sqrt(np.mean(dev ** 2))), censored=int(censored.sum()), realizations=scn.realizations,
        n_estimation=scn.n_estimation, n_evaluation=n_ev, batch_quantiles=qs,
        solutions=tuple(f.solution for f in fit.fits),
        tail_ratio=float(last.bound / last.empirical) if last.empirical > 0 else float("inf"))


def _check_stable(scn: Scenario):
    means = scn.mean_service_bits()
    lam = scn.traffic.mean_rate_bits_per_slot
    if min(means) <= lam:
        raise ConfigError(f"mean service {min(means):.1f} bits/slot does not exceed arrival rate {lam:.1f}")


def _with_context(scn: Scenario, exc: SbmError):
    exc.args = (f"[scenario {scn.id}] {exc.args[0] if exc.args else exc}",) + tuple(exc.args[1:])
    return exc


def fit_scenario(scn: Scenario, workers: int = 1) -> ScenarioFit:
    """Estimation side only: simulates the estimation split and fits every grid point."""
    try:
        _check_stable(scn)
        jobs = [j for j in _blocks(scn) if j[1] == "est"]
        est = _map_jobs(jobs, workers)
        return fit_blocks(scn, est)
    except SbmError as exc:
        raise _with_context(scn, exc)


def run_scenario(scn: Scenario, workers: int = 1) -> ComparisonReport:
    """Simulate every realization, fit on the estimation split, compare on the rest."""
    try:
        _check_stable(scn)
        est, ev = _map_blocks(scn, workers)
        return analyze_blocks(scn, est, ev)
    except SbmError as exc:
        raise _with_context(scn, exc)


def run_hop_sweep(base: Scenario, hop_range: Sequence[int], workers: int = 1) -> list:
    hop_range = list(hop_range)
    if not hop_range or min(hop_range) < 1 or max(hop_range) > 16:
        raise ConfigError(f"hop_range must lie within [1, 16], got {hop_range}")
    return [run_scenario(base.with_hops(h), workers) for h in hop_range]
