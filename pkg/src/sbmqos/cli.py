"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 infeasible solve, 3 selftest failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import xmsb_from_windows
from .config import ParsedConfig, SCHEMA, load_config
from .csvio import atomic_write_text, sha256_file, write_csv
from .errors import ConfigError, InfeasibleError, SbmError
from .montecarlo import (ComparisonReport, Scenario, _draw_block, default_workers, fit_scenario, run_scenario,
                         simulate_realization)
from .provision import QosTarget, minimum_service_rate
from .selftest import upcrossing_suite, unit_mean_suite
from .tandem import simulate, write_trace_csv
from .traffic import TrafficConfig
from .units import ms_to_slots

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SELFTEST = 0, 1, 2, 3

RESULT_COLUMNS = ("hops", "wb_slots", "wb_ms", "theta", "bound", "empirical", "deviation", "rmse_group_id")
DETAIL_COLUMNS = ("hops", "wb_slots", "wb_ms", "theta", "bound", "raw_bound", "empirical", "empirical_inclusive",
                  "ci99_lower", "ci99_upper", "deviation", "frequency_y", "mr", "theta_cap", "log_moment", "log_moment_se",
                  "mean_xmsb_kbit", "backlog_bits", "capped", "fallback_reason", "single_crossing")
SOLVER_COLUMNS = ("scenario_id", "hops", "wb", "theta", "theta_cap", "mr", "iterations", "iterations_uncapped",
                  "wall_time", "wall_time_uncapped")
SWEEP_COLUMNS = ("hops", "rmse", "max_deviation", "theta", "iterations", "wall_time")
PROVISION_COLUMNS = ("traffic_mbps", "wb_ms", "epsilon", "c_bits_per_slot", "mean_downlink_bits_per_slot")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _hop_range(text: str):
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hop range {text!r}; use e.g. 2..7 or 2,4,7")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sbmqos", description="Multi-hop delay QoS analysis with sliding block martingales.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="{simulate,analyze,sweep,provision,selftest}", parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="scenario config file")
        sp.add_argument("--out", default="out", help="output directory (created if absent)")
        sp.add_argument("--workers", type=int, default=None, help="worker processes (default: all CPUs)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value; repeatable")
        sp.add_argument("--realizations", type=int, default=None, help="override scenario.realizations")

    common(sub.add_parser("simulate", help="simulate realizations and dump traces"))
    sp = sub.add_parser("analyze", help="one scenario end to end")
    common(sp)
    sp.add_argument("--timings", action="store_true", help="fill wall-time columns in solver diagnostics")
    sp = sub.add_parser("sweep", help="hop-count sweep")
    common(sp)
    sp.add_argument("--hops", type=_hop_range, default=list(range(2, 8)), help="hop range, e.g. 2..7")
    common(sub.add_parser("provision", help="minimum service rate matrix"))
    sp = sub.add_parser("selftest", help="run the property suites")
    common(sp, config_required=False)
    sp.add_argument("--instances", type=int, default=1000, help="synthetic walks in the upcrossing suite")
    return p


# ------------------------------------------------------------------ artifacts


class Run:
    """Collects artifacts and writes the manifest."""

    def __init__(self, out: Path, command: str, cfg: ParsedConfig | None):
        self.out = out
        self.command = command
        self.cfg = cfg
        self.artifacts: list[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name, header, rows) -> Path:
        path = write_csv(self.out / name, header, rows)
        self.artifacts.append(path)
        return path

    def manifest(self, extra=None) -> Path:
        scn = self.cfg.scenario if self.cfg else None
        doc = {
            "command": self.command,
            "version": __version__,
            "config_source": self.cfg.source if self.cfg else None,
            "resolved_config": self.cfg.resolved_text() if self.cfg else None,
            "scenario": _jsonable(asdict(scn)) if scn else None,
            "seeds": {"master_seed": scn.master_seed, "derivation": "SeedSequence(master_seed, spawn_key=(realization, tag)); "
                      "tag 0 traffic, tag 1+h channel of hop h"} if scn else None,
            "artifacts": {p.name: sha256_file(p) for p in sorted(self.artifacts)},
        }
        doc.update(extra or {})
        return atomic_write_text(self.out / "run_manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _blank_if(flag, value):
    return value if flag else ""


def write_report(run: Run, rep: ComparisonReport, scn: Scenario, prefix: str = "", timings: bool = True):
    rows = rep.rows
    run.csv(f"{prefix}results.csv", RESULT_COLUMNS,
            [(rep.hops, r.wb, r.wb_ms, r.theta, r.bound, r.empirical, r.deviation, rep.scenario_id) for r in rows])
    run.csv(f"{prefix}results_detail.csv", DETAIL_COLUMNS,
            [(rep.hops, r.wb, r.wb_ms, r.theta, r.bound, r.raw_bound, r.empirical, r.empirical_inclusive, r.ci_lower, r.ci_upper,
              r.deviation, r.frequency_y, r.mr, r.theta_cap, r.log_moment, r.log_moment_se, r.mean_xmsb, r.backlog,
              int(r.capped), r.fallback_reason, int(r.single_crossing)) for r in rows])
    run.csv(f"{prefix}solver_diagnostics.csv", SOLVER_COLUMNS,
            [(rep.scenario_id, rep.hops, r.wb, r.theta, r.theta_cap, r.mr, r.iterations, r.iterations_uncapped,
              _blank_if(timings, r.wall_time), _blank_if(timings, r.wall_time_uncapped)) for r in rows])
    run.csv(f"{prefix}plot_data.csv", ("wb_ms", "empirical", "bound"), [(r.wb_ms, r.empirical, r.bound) for r in rows])
    run.csv(f"{prefix}empirical_batches.csv", ("wb_ms", "min", "q25", "median", "q75", "max"),
            [(r.wb_ms,) + q for r, q in zip(rows, rep.batch_quantiles)])
    run.csv(f"{prefix}summary.csv", ("scenario_id", "hops", "rmse", "max_deviation", "censored", "realizations",
                                     "n_estimation", "n_evaluation", "tail_ratio"),
            [(rep.scenario_id, rep.hops, rep.rmse, rep.max_deviation, rep.censored, rep.realizations,
              rep.n_estimation, rep.n_evaluation, rep.tail_ratio)])


# ------------------------------------------------------------------ commands


def _load(args, realizations_override: bool = True) -> ParsedConfig:
    overrides = list(args.overrides)
    if realizations_override and args.realizations is not None:
        overrides.append(f"scenario.realizations={args.realizations}")
    return load_config(args.config, overrides)


def cmd_simulate(args) -> int:
    # Here --realizations is the number of traces to dump, not the scenario size.
    cfg = _load(args, realizations_override=False)
    scn = cfg.scenario
    n = args.realizations if args.realizations is not None else 1
    run = Run(Path(args.out), "simulate", cfg)
    service_rows = []
    for r in range(n):
        tr = simulate_realization(scn, r)
        path = run.out / f"trace_r{r}.csv"
        write_trace_csv(tr, path)
        run.artifacts.append(path)
        for h, hop in enumerate(tr.per_hop, start=1):
            service_rows.extend((t, h, int(v)) for t, v in enumerate(hop.s))
        if r == 0:
            run.csv("service_r0.csv", ("slot", "hop", "s_bits"), service_rows)
            service_rows = []
    run.manifest({"realizations_dumped": n})
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load(args)
    scn = cfg.scenario
    run = Run(Path(args.out), "analyze", cfg)
    t0 = time.perf_counter()
    rep = run_scenario(scn, workers=args.workers or default_workers())
    write_report(run, rep, scn, timings=args.timings)
    run.manifest({"wall_time": time.perf_counter() - t0} if args.timings else None)
    _print_report(rep)
    return EXIT_OK


def _print_report(rep: ComparisonReport):
    print(f"{rep.scenario_id}: hops={rep.hops} rmse={rep.rmse:.3e} max_deviation={rep.max_deviation:.3e} "
          f"censored={rep.censored}")
    for r in rep.rows:
        print(f"  wb={r.wb_ms:6.2f} ms theta={r.theta:.4g}/kbit bound={r.bound:.3e} empirical={r.empirical:.3e} "
              f"mr={r.mr:.3e} iter={r.iterations}/{r.iterations_uncapped}")


def sweep_grids(cfg: ParsedConfig) -> dict:
    return {int(k.rsplit("_", 1)[1]): v for k, v in cfg.raw.get("sweep", {}).items()}


def cmd_sweep(args) -> int:
    cfg = _load(args)
    base = cfg.scenario
    run = Run(Path(args.out), "sweep", cfg)
    grids = {h: tuple(int(x) for x in g.replace(",", " ").split()) for h, g in sweep_grids(cfg).items()}
    summary = []
    for h in args.hops:
        scn = base.with_hops(h)
        if h in grids:
            scn = replace(scn, wb_grid=grids[h])
        t0 = time.perf_counter()
        rep = run_scenario(scn, workers=args.workers or default_workers())
        wall = time.perf_counter() - t0
        write_report(run, rep, scn, prefix=f"{h}hop_")
        mid = rep.rows[len(rep.rows) // 2]
        summary.append((h, rep.rmse, rep.max_deviation, mid.theta, sum(r.iterations for r in rep.rows), wall))
        _print_report(rep)
    run.csv("sweep_summary.csv", SWEEP_COLUMNS, summary)
    run.manifest()
    return EXIT_OK


def provision_matrix(cfg: ParsedConfig, workers: int = 1) -> list:
    """One row per (traffic, W^b) cell of the provisioning matrix."""
    base, plan = cfg.scenario, cfg.provision
    wbs = tuple(ms_to_slots(ms, base.slot_seconds) for ms in plan.wb_ms)
    need = 4 * max(wbs)
    rows = []
    for mbps in plan.traffic_mbps:
        traffic = TrafficConfig.from_mbps(mbps, base.slot_seconds, request_rate=base.traffic.request_rate,
                                          burst_distribution=base.traffic.burst_distribution)
        scn = replace(base, id=f"{base.id}@{mbps:g}Mbps", traffic=traffic, wb_grid=wbs, epsilon=plan.epsilon,
                      horizon=max(base.horizon, base.analysis_slot + need))
        fit = fit_scenario(scn, workers)
        for i, f in enumerate(fit.fits):
            theta = fit.theta_for(scn, i)
            est = xmsb_from_windows(f.xmsb_windows, theta, f.wb)
            res = minimum_service_rate(est, QosTarget(f.wb, plan.epsilon, base.slot_seconds), theta,
                                       fit.mean_arrival_bits)
            rows.append(dict(traffic_mbps=mbps, wb_ms=f.wb * base.slot_seconds * 1e3, epsilon=plan.epsilon,
                             result=res, mean_arrival=fit.mean_arrival_bits, solution=f.solution))
    return rows


def cmd_provision(args) -> int:
    cfg = _load(args)
    run = Run(Path(args.out), "provision", cfg)
    rows = provision_matrix(cfg, args.workers or default_workers())
    run.csv("provision.csv", PROVISION_COLUMNS,
            [(r["traffic_mbps"], r["wb_ms"], r["epsilon"], r["result"].c_bits_per_slot, r["mean_arrival"])
             for r in rows])
    run.csv("provision_detail.csv", PROVISION_COLUMNS + ("raw_c_bits_per_slot", "branch", "theta", "implied_backlog_bits"),
            [(r["traffic_mbps"], r["wb_ms"], r["epsilon"], r["result"].c_bits_per_slot, r["mean_arrival"],
              r["result"].raw_c_bits_per_slot, r["result"].branch, r["result"].theta, r["result"].implied_backlog)
             for r in rows])
    run.manifest()
    for r in rows:
        res = r["result"]
        print(f"{r['traffic_mbps']:g} Mbps wb={r['wb_ms']:g} ms: C={res.c_bits_per_slot:.1f} bits/slot "
              f"(arrival {r['mean_arrival']:.1f}, raw {res.raw_c_bits_per_slot:.1f}, {res.branch})")
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = upcrossing_suite(args.instances) + unit_mean_suite()
    failed = [c for c in results if not c.passed]
    run = Run(Path(args.out), "selftest", None)
    run.csv("selftest.csv", ("check", "passed", "detail"), [(c.name, int(c.passed), c.detail) for c in results])
    run.manifest()
    print(f"selftest: {len(results) - len(failed)}/{len(results)} checks passed")
    for c in failed:
        print(f"  FAIL {c.name}: {c.detail}")
    return EXIT_SELFTEST if failed else EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "sweep": cmd_sweep, "provision": cmd_provision,
            "selftest": cmd_selftest}


def dispatch(args) -> int:
    try:
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, SbmError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
