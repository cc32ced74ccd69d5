#!/usr/bin/env python3
"""Capped vs. uncapped theta solve: feasibility evaluations and wall time per grid point."""
import argparse
from pathlib import Path

import numpy as np

from sbmqos.config import parse_config
from sbmqos.csvio import write_csv
from sbmqos.montecarlo import default_workers, fit_scenario

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hops", type=int, nargs="+", default=list(range(2, 8)))
    ap.add_argument("--realizations", type=int, default=10_000)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--out", default="out/solver_efficiency.csv")
    args = ap.parse_args()

    rows, reductions = [], []
    for h in args.hops:
        scn = parse_config(ROOT / "configs" / f"paper_{h}hop.cfg", [f"scenario.realizations={args.realizations}"])
        fit = fit_scenario(scn, args.workers)
        for f in fit.fits:
            c, u = f.solution, f.solution_uncapped
            rows.append((h, f.wb, c.theta, u.theta, c.theta_cap, c.mr, c.iterations, u.iterations, c.wall_time,
                         u.wall_time, c.fallback_reason))
        capped = sum(f.solution.iterations for f in fit.fits)
        uncapped = sum(f.solution_uncapped.iterations for f in fit.fits)
        reductions.append(1 - capped / uncapped)
        print(f"{h} hops: {capped} vs {uncapped} evaluations ({reductions[-1]:.1%} fewer)")
    print(f"median reduction {np.median(reductions):.1%}")
    write_csv(args.out, ("hops", "wb", "theta", "theta_uncapped", "theta_cap", "mr", "iterations",
                         "iterations_uncapped", "wall_time", "wall_time_uncapped", "fallback_reason"), rows)


if __name__ == "__main__":
    main()
