import json

import pytest

from nsfd_sirvs.cli import main
from nsfd_sirvs.scenarios import BUILTIN_NAMES, builtin, spec_to_config


def _read_csv(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_extinction_trajectory(tmp_path, capsys):
    rc = main(["simulate", "extinction_5_1", "--h", "1", "--t-end", "200",
               "--out", str(tmp_path)])
    assert rc == 0
    header, rows = _read_csv(tmp_path / "trajectory_nsfd_h1.csv")
    assert header == ["t", "S", "I", "R", "V"]
    assert len(rows) == 201
    assert float(rows[-1][2]) < 1e-8


def test_simulate_unknown_name_exits_2(tmp_path, capsys):
    rc = main(["simulate", "not_a_scenario", "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    for name in BUILTIN_NAMES:
        assert name in err


def test_simulate_measles_monthly(tmp_path):
    rc = main(["simulate", "measles_france_5_2", "--h", "1", "--t-end", "60",
               "--out", str(tmp_path)])
    assert rc == 0
    _, rows = _read_csv(tmp_path / "trajectory_nsfd_h1.csv")
    assert len(rows) == 61
    assert float(rows[0][2]) == 106.0


def test_simulate_rk4_method(tmp_path):
    rc = main(["simulate", "extinction_5_1", "--h", "0.05", "--t-end", "5",
               "--method", "rk4", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "trajectory_rk4_h0.05.csv").exists()


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

def test_thresholds_extinction_rows(tmp_path):
    rc = main(["thresholds", "extinction_5_1", "--h", "1", "--h", "0.5",
               "--lambda", "4", "--out", str(tmp_path)])
    assert rc == 0
    header, rows = _read_csv(tmp_path / "thresholds.csv")
    assert header == ["kind", "h", "lambda", "r_lower", "r_upper", "verdict",
                      "exact_periodic"]
    by_h = {row[1]: row for row in rows if row[0] == "discrete"}
    assert abs(float(by_h["1"][4]) - 0.644) <= 1e-3
    assert abs(float(by_h["0.5"][4]) - 0.601) <= 1e-3
    assert by_h["1"][5] == "Extinction"
    cont = [row for row in rows if row[0] == "continuous"][0]
    assert abs(float(cont[4]) - (-0.6)) <= 1e-3


def test_thresholds_persistence_rows(tmp_path):
    rc = main(["thresholds", "persistence_5_1", "--h", "2", "--h", "1", "--h", "0.5",
               "--lambda", "4", "--out", str(tmp_path)])
    assert rc == 0
    _, rows = _read_csv(tmp_path / "thresholds.csv")
    by_h = {row[1]: row for row in rows if row[0] == "discrete"}
    assert float(by_h["2"][3]) == pytest.approx(3.201, rel=1e-2)
    assert float(by_h["1"][3]) == pytest.approx(5.9, rel=1e-2)
    assert float(by_h["0.5"][3]) == pytest.approx(10.2, rel=1e-2)
    cont = [row for row in rows if row[0] == "continuous"][0]
    assert float(cont[3]) == pytest.approx(3.4, abs=1e-3)
    assert cont[5] == "Permanence"


def test_thresholds_neutral_single_factor(tmp_path):
    rc = main(["thresholds", "extinction_5_1", "--h", "4", "--lambda", "0.0",
               "--out", str(tmp_path)])
    assert rc == 0
    _, rows = _read_csv(tmp_path / "thresholds.csv")
    disc = [row for row in rows if row[0] == "discrete"][0]
    assert abs(float(disc[3]) - 1.0) <= 1e-10
    assert abs(float(disc[4]) - 1.0) <= 1e-10
    assert disc[5] == "Inconclusive"


# ---------------------------------------------------------------------------
# consistency
# ---------------------------------------------------------------------------

def test_consistency_report_values(tmp_path):
    rc = main(["consistency", "extinction_5_1", "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "consistency.json").read_text())
    assert payload["applicable"]
    assert payload["h_max_upper"] == pytest.approx(0.5093, abs=1e-3)
    assert payload["notes"]["h_max_upper_reported"] == 0.05
    assert payload["continuous_verdict"] == "Extinction"


def test_consistency_inconsistency_example(tmp_path):
    rc = main(["consistency", "inconsistency_4", "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "consistency.json").read_text())
    assert payload["continuous_verdict"] == "Permanence"
    row = payload["discrete_literal"][0]
    assert abs(row["r_upper"] - 1.0) <= 1e-9  # literal one-period evaluation
    assert row["verdict"] != "Permanence"
    assert payload["inconsistency_flag"]
    assert payload["notes"]["discrete_threshold_reported_closed_form"] == 0.6875


def test_consistency_unbounded_for_constant_coefficients(tmp_path):
    cfg = spec_to_config(builtin("extinction_5_1"))
    cfg["schedules"]["beta"] = {"kind": "constant", "params": {"value": 0.1}}
    cfg["schedules"]["sigma"] = {"kind": "constant", "params": {"value": 0.1}}
    cfg_path = tmp_path / "const.json"
    cfg_path.write_text(json.dumps(cfg))
    rc = main(["consistency", str(cfg_path), "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "consistency.json").read_text())
    assert payload["sup_abs_fprime"] == 0.0
    assert payload["h_max_upper"] == "unbounded"


def test_consistency_sweep_flag(tmp_path):
    rc = main(["consistency", "extinction_5_1", "--sweep", "--scan", "500",
               "--burn-in", "200", "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "consistency.json").read_text())
    assert len(payload["sweep"]) == 16
    assert payload["sweep_all_match"]


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def test_compare_table(tmp_path):
    rc = main(["compare", "extinction_5_1", "--h", "2", "--h", "1", "--h", "0.5",
               "--t-end", "50", "--out", str(tmp_path)])
    assert rc == 0
    header, rows = _read_csv(tmp_path / "compare.csv")
    assert header == ["h", "method", "sup_dev_I", "negativity_flag"]
    assert len(rows) == 6
    nsfd = {row[0]: row for row in rows if row[1] == "nsfd"}
    euler = {row[0]: row for row in rows if row[1] == "euler"}
    assert all(row[3] == "false" for row in nsfd.values())
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    exceptions = manifest["nsfd_worse_than_euler_at"]
    for h in ("2", "1", "0.5"):
        dev_n, dev_e = float(nsfd[h][2]), float(euler[h][2])
        assert dev_n <= dev_e or float(h) in exceptions


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

def test_scenario_list(capsys):
    rc = main(["scenario", "list"])
    assert rc == 0
    out = capsys.readouterr().out
    for name in BUILTIN_NAMES:
        assert name in out


def test_scenario_run_inconsistency_bundle(tmp_path):
    rc = main(["scenario", "run", "inconsistency_4", "--out", str(tmp_path)])
    assert rc == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["inconsistency_flag"] is True
    assert (tmp_path / "thresholds.csv").exists()
    assert (tmp_path / "verdicts.csv").exists()
    _, rows = _read_csv(tmp_path / "verdicts.csv")
    assert ["continuous", "", "Permanence"] in rows


def test_scenario_run_with_observed_writes_residuals(tmp_path):
    obs = tmp_path / "obs.csv"
    obs.write_text("t,cases\n0,106\n1,110\n2,140\n")
    out = tmp_path / "bundle"
    rc = main(["scenario", "run", "measles_france_5_2", "--observed", str(obs),
               "--out", str(out)])
    assert rc == 0
    assert (out / "residuals_h1.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "1" in manifest["rms_residuals"]


def test_scenario_missing_observed_is_io_error(tmp_path):
    rc = main(["scenario", "run", "measles_france_5_2",
               "--observed", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert rc == 4


def test_scenario_run_from_config_with_relative_observed(tmp_path):
    cfg = spec_to_config(builtin("extinction_5_1"))
    cfg["t_end"] = 20.0
    cfg["observed_path"] = "obs.csv"
    (tmp_path / "obs.csv").write_text("t,cases\n0,0.2\n4,0.05\n8,0.01\n")
    cfg_path = tmp_path / "scenario.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "bundle"
    rc = main(["scenario", "run", str(cfg_path), "--out", str(out)])
    assert rc == 0
    assert (out / "residuals_h1.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["spec"]["config"]["name"] == "extinction_5_1"


# ---------------------------------------------------------------------------
# determinism and manifest replay
# ---------------------------------------------------------------------------

def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["thresholds", "extinction_5_1", "--h", "1", "--lambda", "4",
                     "--out", str(out)]) == 0
    assert (a / "thresholds.csv").read_bytes() == (b / "thresholds.csv").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_manifest_replay_reproduces_outputs(tmp_path):
    first = tmp_path / "first"
    assert main(["thresholds", "persistence_5_1", "--h", "2", "--lambda", "4",
                 "--out", str(first)]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    replay = tmp_path / "replay"
    assert main(manifest["argv"] + ["--out", str(replay)]) == 0
    assert (first / "thresholds.csv").read_bytes() == (replay / "thresholds.csv").read_bytes()


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["thresholds", str(bad), "--out", str(tmp_path)]) == 2


def test_numeric_failure_exit_code(tmp_path, capsys, monkeypatch):
    import nsfd_sirvs.cli as cli_module
    from nsfd_sirvs.errors import StepError

    def boom(*args, **kwargs):
        raise StepError("balance identity violated", step=17, residual=1.0)

    monkeypatch.setattr(cli_module, "simulate_discrete", boom)
    rc = main(["simulate", "extinction_5_1", "--h", "1", "--out", str(tmp_path)])
    assert rc == 3
    assert "step 17" in capsys.readouterr().err
