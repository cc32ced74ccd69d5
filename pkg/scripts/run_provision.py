#!/usr/bin/env python3
"""Minimum service rate matrix (traffic x W^b) with the branch taken in each cell."""
import argparse
from pathlib import Path

from sbmqos.cli import main as cli_main
from sbmqos.montecarlo import default_workers

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "paper_4hop.cfg"))
    ap.add_argument("--realizations", type=int, default=None)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--out", default="out/provision")
    args = ap.parse_args()
    argv = ["provision", "--config", args.config, "--out", args.out, "--workers", str(args.workers)]
    if args.realizations:
        argv += ["--realizations", str(args.realizations)]
    raise SystemExit(cli_main(argv))


if __name__ == "__main__":
    main()
