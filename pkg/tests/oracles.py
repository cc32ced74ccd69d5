"""Independent brute-force reference implementations used only by tests."""
import numpy as np


def lindley_loop(a, s):
    Q, out = 0, []
    for x, y in zip(a, s):
        Q = max(0, Q + int(x) - int(y))
        out.append(Q)
    return out


def minplus_departures(A, s):
    """A*(t) = min over 0 <= u <= t of A(u) + S(u, t), with A(0) = 0 before slot 1.

    ``A`` holds cumulative arrivals at slots 1..T; ``s`` is per-slot service.
    Returns cumulative departures at slots 1..T.
    """
    A0 = [0] + [int(v) for v in A]
    S0 = [0]
    for v in s:
        S0.append(S0[-1] + int(v))
    out = []
    for t in range(1, len(A0)):
        out.append(min(A0[u] + S0[t] - S0[u] for u in range(t + 1)))
    return out


def minplus_tandem(arrivals, services):
    """Last-hop cumulative departures via repeated min-plus convolution."""
    A = list(np.cumsum(arrivals))
    for s in services:
        A = minplus_departures(A, s)
    return A


def delay_by_departures(A1, Dlast, t):
    """inf{tau >= 0 : A1(t) <= A*_hop(t + tau)}; None when unresolved in the horizon."""
    for tau in range(len(A1) - t):
        if A1[t] <= Dlast[t + tau]:
            return tau
    return None
