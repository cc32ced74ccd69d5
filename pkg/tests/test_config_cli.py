import json
import math

import numpy as np
import pytest

from sbmqos.cli import main
from sbmqos.config import load_config, parse_config, parse_config_text
from sbmqos.csvio import read_csv, sha256_file, write_csv
from sbmqos.errors import ConfigError
from sbmqos.tandem import read_trace_csv

CFG = "configs/paper_4hop.cfg"

MINIMAL = """\
[scenario]
hops = 1
horizon = 400
warmup = 100
analysis_slot = 200

[traffic]
mean_rate_mbps = 4

[channel]
model = UMa

[qos]
wb_slots = 10
"""


def test_minimal_config_defaults():
    scn = parse_config_text(MINIMAL).scenario
    assert scn.hops == 1 and scn.wb_grid == (10,)
    assert scn.traffic.mean_rate_bits_per_slot == pytest.approx(2000.0)
    assert (scn.realizations, scn.epsilon, scn.master_seed, scn.estimation_fraction) == (100_000, 1e-5, 0, 0.2)
    assert (scn.theta_mode, scn.backlog_mode, scn.event) == ("per_wb", "mean", "strict")
    assert scn.channels[0].carrier_frequency_ghz == 28.0


def test_realizations_ten_rejected_with_line():
    text = MINIMAL.replace("hops = 1", "hops = 1\nrealizations = 10")
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text, source="tiny.cfg")
    msg = str(exc.value)
    assert "tiny.cfg:3:" in msg and "realizations" in msg and ">= 100" in msg


@pytest.mark.parametrize("edit, needle", [
    (("hops = 1", "hops = one"), "hops"),
    (("[qos]", "[qos]\nbogus = 1"), "bogus"),
    (("[qos]", "[nonsense]\nx = 1\n[qos]"), "nonsense"),
    (("analysis_slot = 200", "analysis_slot = 50"), "analysis_slot"),
    (("wb_slots = 10", "wb_ms = 1.25"), "wb_ms"),
    (("mean_rate_mbps = 4", "request_rate = 1"), "mean_rate"),
])
def test_errors_name_the_key(edit, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config_text(MINIMAL.replace(*edit))


def test_shipped_four_hop_config():
    cfg = load_config(CFG)
    scn = cfg.scenario
    assert scn.hops == 4 and scn.epsilon == 1e-5
    assert all(c.carrier_frequency_ghz == 28.0 for c in scn.channels)
    assert scn.channels[0].model == "UMa" and scn.channels[0].shadow_sigma_db == 8.2
    assert cfg.provision.traffic_mbps == (7.0, 11.0, 16.0)


def test_overrides():
    scn = parse_config(CFG, ["scenario.realizations=500", "channel.hop.2.tx_power_dbm=30"])
    assert scn.realizations == 500 and scn.channels[1].tx_power_dbm == 30.0
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(CFG, ["scenario.nope=1"])
    with pytest.raises(ConfigError, match="section.key"):
        parse_config(CFG, ["realizations=500"])


def test_csv_roundtrip_is_atomic(tmp_path):
    p = write_csv(tmp_path / "x.csv", ("a", "b"), [(1, 0.1), (2, np.float64(1 / 3))])
    rows = read_csv(p)
    assert rows[1]["b"] == repr(1 / 3) and float(rows[0]["b"]) == 0.1
    assert [f.name for f in tmp_path.iterdir()] == ["x.csv"]


def test_unknown_subcommand_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1


def test_config_error_exit_one(tmp_path, capsys):
    assert main(["analyze", "--config", CFG, "--out", str(tmp_path), "--realizations", "10"]) == 1
    assert "realizations" in capsys.readouterr().err


def test_infeasible_exit_two(tmp_path):
    # A bracket entirely above the steady-state crossing has no feasible theta.
    args = ["analyze", "--config", CFG, "--out", str(tmp_path), "--realizations", "300", "--workers", "1",
            "--set", "solver.theta_min=50", "--set", "solver.theta_max=60"]
    assert main(args) == 2


def test_selftest_exit_zero(tmp_path):
    assert main(["selftest", "--out", str(tmp_path), "--instances", "60"]) == 0
    rows = read_csv(tmp_path / "selftest.csv")
    assert len(rows) == 60 + 6 and all(r["passed"] == "1" for r in rows)


def test_analyze_artifacts_and_manifest(tmp_path):
    out = tmp_path / "run"
    assert main(["analyze", "--config", CFG, "--out", str(out), "--realizations", "400", "--workers", "1"]) == 0
    res = read_csv(out / "results.csv")
    assert list(res[0]) == ["hops", "wb_slots", "wb_ms", "theta", "bound", "empirical", "deviation",
                            "rmse_group_id"]
    assert [r["wb_slots"] for r in res] == ["27", "28", "29", "30", "31"]
    diag = read_csv(out / "solver_diagnostics.csv")
    assert all(int(r["iterations"]) >= 1 and r["wall_time"] == "" for r in diag)
    man = json.loads((out / "run_manifest.json").read_text())
    assert man["seeds"]["master_seed"] == 20240604
    assert "realizations = 400" in man["resolved_config"]
    for name, digest in man["artifacts"].items():
        assert sha256_file(out / name) == digest
    assert not [f for f in out.iterdir() if f.name.endswith(".tmp")]


def test_simulate_dumps_traces(tmp_path):
    assert main(["simulate", "--config", CFG, "--out", str(tmp_path), "--realizations", "2"]) == 0
    tr = read_trace_csv(tmp_path / "trace_r1.csv")
    assert tr.hops == 4 and tr.horizon == 2000
    assert np.all(tr.total_backlog == tr.A1 - tr.departures_last)
