#!/usr/bin/env python3
"""Hop ladder sweep: one analyze run per shipped config, plus a combined summary CSV.

Each config carries its own W^b grid, so this loops over configs/paper_<h>hop.cfg rather
than replicating one scenario.
"""
import argparse
import time
from pathlib import Path

from sbmqos.config import parse_config
from sbmqos.cli import SWEEP_COLUMNS, Run, write_report
from sbmqos.montecarlo import default_workers, run_scenario

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hops", type=int, nargs="+", default=list(range(2, 8)))
    ap.add_argument("--realizations", type=int, default=None)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args()

    run = Run(Path(args.out), "run_sweep", None)
    summary = []
    for h in args.hops:
        overrides = [f"scenario.realizations={args.realizations}"] if args.realizations else []
        scn = parse_config(ROOT / "configs" / f"paper_{h}hop.cfg", overrides)
        t0 = time.perf_counter()
        rep = run_scenario(scn, args.workers)
        wall = time.perf_counter() - t0
        write_report(run, rep, scn, prefix=f"{h}hop_")
        mid = rep.rows[len(rep.rows) // 2]
        summary.append((h, rep.rmse, rep.max_deviation, mid.theta, sum(r.iterations for r in rep.rows), wall))
        worst = max(rep.rows, key=lambda r: r.empirical - r.bound)
        print(f"{h} hops: rmse={rep.rmse:.3e} max_dev={rep.max_deviation:.3e} tail_ratio={rep.tail_ratio:.3g} "
              f"worst wb={worst.wb} bound={worst.bound:.2e} emp={worst.empirical:.2e} ({wall:.0f} s)")
    run.csv("sweep_summary.csv", SWEEP_COLUMNS, summary)
    run.manifest()


if __name__ == "__main__":
    main()
