"""FIFO tandem queue simulation on whole bits and end-to-end delay measurement.

Slots are 0-based array indices; cumulative processes at index t include slot t,
and every cumulative process is zero before slot 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .csvio import read_csv, write_csv
from .errors import ConfigError, ShapeError


def lindley(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Backlog Q(t) = max(0, Q(t-1) + a(t) - s(t)), Q(-1) = 0, along the last axis.

    Uses the closed form Q = X - min(0, running min X) with X = cumsum(a - s), which
    is exact on integers and vectorizes over leading axes.
    """
    x = np.cumsum(np.asarray(a, dtype=np.int64) - np.asarray(s, dtype=np.int64), axis=-1)
    floor = np.minimum(np.minimum.accumulate(x, axis=-1), 0)
    return x - floor


def hop_departures(a: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Per-slot departures d(t) = Q(t-1) + a(t) - Q(t)."""
    prev = np.zeros_like(Q)
    prev[..., 1:] = Q[..., :-1]
    return prev + a - Q


@dataclass(frozen=True)
class QueueTrace:
    a: np.ndarray
    s: np.ndarray
    q: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    S: np.ndarray
    Astar: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.a)

    @property
    def departures(self) -> np.ndarray:
        return np.diff(self.Astar, prepend=0)


def queue_trace(a, s) -> QueueTrace:
    a = np.asarray(a, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    Q = lindley(a, s)
    A = np.cumsum(a)
    return QueueTrace(a=a, s=s, q=np.diff(Q, prepend=0), Q=Q, A=A, S=np.cumsum(s), Astar=A - Q)


@dataclass(frozen=True)
class TandemTrace:
    per_hop: tuple

    @property
    def hops(self) -> int:
        return len(self.per_hop)

    @property
    def horizon(self) -> int:
        return self.per_hop[0].horizon

    @property
    def A1(self) -> np.ndarray:
        return self.per_hop[0].A

    @property
    def departures_last(self) -> np.ndarray:
        """Cumulative departures of the last hop, A*_hop(t)."""
        return self.per_hop[-1].Astar

    @property
    def total_backlog(self) -> np.ndarray:
        return np.sum([h.Q for h in self.per_hop], axis=0)


def simulate(hops: int, arrivals, services) -> TandemTrace:
    """Run the tandem: hop i+1's arrivals are hop i's departures."""
    if hops < 1:
        raise ConfigError(f"hops must be >= 1, got {hops}")
    a = np.asarray(arrivals, dtype=np.int64)
    s_all = [np.asarray(s, dtype=np.int64) for s in services]
    if a.ndim != 1:
        raise ShapeError(f"arrivals must be 1-D, got shape {a.shape}")
    if len(s_all) != hops:
        raise ShapeError(f"expected {hops} service sequences, got {len(s_all)}")
    for i, s in enumerate(s_all):
        if s.shape != a.shape:
            raise ShapeError(f"service sequence for hop {i + 1} has length {len(s)}, arrivals have {len(a)}")
    per_hop = []
    for s in s_all:
        tr = queue_trace(a, s)
        per_hop.append(tr)
        a = tr.departures
    return TandemTrace(tuple(per_hop))


@dataclass(frozen=True)
class CensoredDelay:
    """Delay not resolved before the horizon; the true delay is at least ``at_least``."""

    at_least: int


DelayValue = Union[int, CensoredDelay]


def delay(trace: TandemTrace, t: int) -> DelayValue:
    """Least tau >= 0 with sum_i Q_i(t+tau) <= A1(t+tau) - A1(t)."""
    T = trace.horizon
    if not 0 <= t < T:
        raise ConfigError(f"slot {t} outside horizon [0, {T})")
    A1 = trace.A1
    ok = trace.total_backlog[t:] <= A1[t:] - A1[t]
    if not ok.any():
        return CensoredDelay(T - t)
    return int(np.argmax(ok))


def batch_delays(A1_t: np.ndarray, D_future: np.ndarray):
    """Vectorized delays for many realizations.

    ``A1_t``: first-hop cumulative arrivals at the analysis slot, shape (R,).
    ``D_future``: last-hop cumulative departures from the analysis slot on, shape (R, n).
    Because departures are nondecreasing, the delay is the count of future slots whose
    departures still fall short of A1_t. Returns (delays, censored) where a censored
    delay holds its lower bound n.
    """
    w = np.sum(D_future < A1_t[:, None], axis=1)
    return w.astype(np.int64), w == D_future.shape[1]


def exceedance_probabilities(delays, censored, wb_grid, strict: bool = False) -> np.ndarray:
    """Fraction of realizations with W >= wb (or W > wb when ``strict``).

    A censored delay is known only to be >= its stored lower bound; it counts as an
    exceedance at every grid point, which is exact below the bound and conservative above.
    """
    d = np.asarray(delays)
    c = np.asarray(censored, dtype=bool)
    if d.size == 0:
        raise ConfigError("no delays supplied")
    out = []
    for wb in wb_grid:
        hit = d > wb if strict else d >= wb
        out.append(np.count_nonzero(hit | c) / d.size)
    return np.array(out)


def delay_unreliability(traces: Iterable[TandemTrace], wb_grid: Sequence[int], t: int,
                        strict: bool = False) -> np.ndarray:
    """Empirical P{W(t) >= W^b} per grid point over a collection of traces."""
    values = [delay(tr, t) for tr in traces]
    if not values:
        raise ConfigError("delay_unreliability needs at least one trace")
    delays = np.array([v.at_least if isinstance(v, CensoredDelay) else v for v in values])
    censored = np.array([isinstance(v, CensoredDelay) for v in values])
    return exceedance_probabilities(delays, censored, wb_grid, strict=strict)


TRACE_COLUMNS = ("slot", "hop", "a", "s", "q", "Q", "A", "Astar")


def write_trace_csv(trace: TandemTrace, path) -> None:
    rows = []
    for h, hop in enumerate(trace.per_hop, start=1):
        for t in range(hop.horizon):
            rows.append((t, h, int(hop.a[t]), int(hop.s[t]), int(hop.q[t]), int(hop.Q[t]),
                         int(hop.A[t]), int(hop.Astar[t])))
    write_csv(path, TRACE_COLUMNS, rows)


def read_trace_csv(path) -> TandemTrace:
    rows = read_csv(path)
    hops = sorted({int(r["hop"]) for r in rows})
    per_hop = []
    for h in hops:
        sel = sorted((r for r in rows if int(r["hop"]) == h), key=lambda r: int(r["slot"]))
        col = lambda k: np.array([int(r[k]) for r in sel], dtype=np.int64)
        a, s = col("a"), col("s")
        per_hop.append(QueueTrace(a=a, s=s, q=col("q"), Q=col("Q"), A=col("A"), S=np.cumsum(s), Astar=col("Astar")))
    return TandemTrace(tuple(per_hop))
