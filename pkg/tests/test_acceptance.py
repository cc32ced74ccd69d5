"""Acceptance criteria 1-9. Each test prints one PASS/FAIL line, collected in the terminal summary.

Criteria 4, 5, 7 and 8 simulate 10^4 to 10^5 realizations per scenario and are marked slow.
"""
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import delay_by_departures, minplus_tandem
from sbmqos.channel import draw_service
from sbmqos.cli import main, provision_matrix
from sbmqos.config import load_config, parse_config
from sbmqos.martingale import busy_mask
from sbmqos.montecarlo import default_workers, fit_scenario, run_scenario
from sbmqos.selftest import upcrossing_suite, unit_mean_suite
from sbmqos.tandem import CensoredDelay, delay, simulate
from sbmqos.traffic import generate_arrivals

ROOT = Path(__file__).resolve().parents[1]
LADDER = range(2, 8)


def _config(hops: int) -> Path:
    return ROOT / "configs" / f"paper_{hops}hop.cfg"


@contextmanager
def criterion(number: int, budget_s: float):
    """Records one PASS/FAIL line; the block sets ``state['ok']`` and ``state['detail']``."""
    state = {"ok": False, "detail": "did not finish"}
    t0 = time.perf_counter()
    try:
        yield state
    finally:
        elapsed = time.perf_counter() - t0
        within = elapsed <= budget_s
        ok = state["ok"] and within
        line = (f"criterion {number}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s of {budget_s:.0f} s) "
                f"{state['detail']}")
        ACCEPTANCE_LINES.append(line)
        print(line)
    assert state["ok"], state["detail"]
    assert within, f"runtime {elapsed:.1f} s exceeds {budget_s:.0f} s"


def test_criterion_1_queue_oracles():
    with criterion(1, 10) as st:
        rng = np.random.default_rng(1)
        bad_dep = bad_delay = slots = 0
        for _ in range(500):
            T, hops = int(rng.integers(1, 51)), int(rng.integers(1, 5))
            a = rng.integers(0, 20, T)
            s = [rng.integers(0, 25, T) for _ in range(hops)]
            tr = simulate(hops, a, s)
            bad_dep += list(tr.departures_last) != minplus_tandem(a, s)
            for t in range(T):
                slots += 1
                d = delay(tr, t)
                ref = delay_by_departures(tr.A1, tr.departures_last, t)
                bad_delay += (ref is None) != isinstance(d, CensoredDelay) or (ref is not None and d != ref)
        st["ok"] = bad_dep == 0 and bad_delay == 0
        st["detail"] = f"departure mismatches {bad_dep}/500, delay mismatches {bad_delay}/{slots} slots"


def test_criterion_2_unit_mean():
    with criterion(2, 30) as st:
        res = unit_mean_suite()
        failed = [c for c in res if not c.passed]
        st["ok"] = not failed
        st["detail"] = f"{len(res) - len(failed)}/{len(res)} within 3 se; " + "; ".join(
            f"{c.name}: {c.detail}" for c in (failed or res[:1]))


def test_criterion_3_upcrossing_dominance():
    with criterion(3, 60) as st:
        res = upcrossing_suite(1000)
        failed = [c for c in res if not c.passed]
        st["ok"] = not failed
        st["detail"] = f"{len(res) - len(failed)}/{len(res)} walks with O_T[0] <= bound" + (
            f"; first failure {failed[0].name} {failed[0].detail}" if failed else "")


@pytest.mark.slow
def test_criterion_4_occurrence_chain():
    with criterion(4, 300) as st:
        lines, ok = [], True
        for h in LADDER:
            rep = run_scenario(parse_config(_config(h), ["scenario.realizations=10000"]), default_workers())
            for r in rep.rows:
                first = r.empirical <= r.frequency_y
                second = r.frequency_y <= r.mr
                if not (first and second):
                    ok = False
                    lines.append(f"{h}hop wb={r.wb}: P={r.empirical:.2e} freq={r.frequency_y:.2e} mr={r.mr:.2e}")
            incl = sum(r.empirical_inclusive > r.frequency_y for r in rep.rows)
            lines.append(f"{h}hop inclusive-event breaks={incl}")
        st["ok"] = ok
        st["detail"] = "strict P <= freq{Y>=0} <= mr at every grid point; " + "; ".join(lines)


@pytest.mark.slow
def test_criterion_5_dupb_validity_and_tightness():
    with criterion(5, 1200) as st:
        parts, violations, point_below, dev4 = [], 0, 0, None
        for h in LADDER:
            rep = run_scenario(parse_config(_config(h)), default_workers())
            v = sum(r.ci_lower > r.bound for r in rep.rows)
            violations += v
            point_below += sum(r.bound < r.empirical for r in rep.rows)
            if h == 4:
                dev4 = rep.max_deviation
            parts.append(f"{h}hop max_dev={rep.max_deviation:.2e} ci_violations={v}")
        st["ok"] = violations == 0 and dev4 is not None and dev4 <= 5e-4
        st["detail"] = (f"CI violations {violations}, point estimates above bound {point_below}, "
                        f"4hop max_dev={dev4:.2e} (limit 5e-4); " + "; ".join(parts))


def test_criterion_6_solver_efficiency():
    with criterion(6, 120) as st:
        reductions, strict, parts = [], True, []
        for h in LADDER:
            fit = fit_scenario(parse_config(_config(h), ["scenario.realizations=10000"]), default_workers())
            capped = sum(f.solution.iterations for f in fit.fits)
            uncapped = sum(f.solution_uncapped.iterations for f in fit.fits)
            strict &= capped < uncapped
            reductions.append(1 - capped / uncapped)
            per_point = sum(f.solution.iterations < f.solution_uncapped.iterations for f in fit.fits)
            parts.append(f"{h}hop {capped}/{uncapped} evals ({per_point}/{len(fit.fits)} points fewer)")
        med = float(np.median(reductions))
        st["ok"] = strict and med >= 0.3
        st["detail"] = f"median reduction {med:.1%}; " + "; ".join(parts)


@pytest.mark.slow
def test_criterion_7_provisioning():
    with criterion(7, 600) as st:
        rows = provision_matrix(load_config(_config(4)), default_workers())
        above = all(r["result"].c_bits_per_slot > r["mean_arrival"] for r in rows)
        gaps = {(r["traffic_mbps"], r["wb_ms"]): r["result"].c_bits_per_slot - r["mean_arrival"] for r in rows}
        ordered = all(gaps[(m, 10.0)] > gaps[(m, 20.0)] for m in (7.0, 11.0, 16.0))
        st["ok"] = above and ordered
        st["detail"] = "; ".join(
            f"{r['traffic_mbps']:g}Mbps/{r['wb_ms']:g}ms C={r['result'].c_bits_per_slot:.1f} "
            f"arrival={r['mean_arrival']:.1f} raw={r['result'].raw_c_bits_per_slot:.1f} {r['result'].branch}"
            for r in rows)


@pytest.mark.slow
def test_criterion_8_determinism(tmp_path):
    with criterion(8, 300) as st:
        outs = {}
        for w in (1, 8):
            out = tmp_path / f"w{w}"
            assert main(["analyze", "--config", str(_config(4)), "--out", str(out), "--workers", str(w)]) == 0
            outs[w] = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
        same = outs[1] == outs[8]
        diff = [n for n in outs[1] if outs[1].get(n) != outs[8].get(n)]
        st["ok"] = same and len(outs[1]) >= 7
        st["detail"] = f"{len(outs[1])} artifacts compared at 1 and 8 workers; differing: {diff or 'none'}"


def test_criterion_9_busy_period_statistics():
    with criterion(9, 60) as st:
        scn = parse_config(_config(4))
        T = 400_000
        a = generate_arrivals(replace(scn.traffic, seed=1), T)
        s = draw_service(replace(scn.channels[0], seed=2), T, scn.slot_seconds)
        hop = simulate(1, a, [s]).per_hop[0]
        m = busy_mask(hop.Q)
        q = hop.q[m]
        mean_ref, var_ref = a.mean() - s.mean(), a.var() + s.var()
        err_mean = abs(q.mean() - mean_ref) / abs(mean_ref)
        err_var = abs(q.var() - var_ref) / var_ref
        st["ok"] = m.sum() >= 100_000 and err_mean <= 0.02 and err_var <= 0.02
        st["detail"] = (f"{int(m.sum())} busy slots; E[q]={q.mean():.1f} vs {mean_ref:.1f} ({err_mean:.1%}), "
                        f"Var[q]={q.var():.4g} vs {var_ref:.4g} ({err_var:.1%})")
