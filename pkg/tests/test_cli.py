"""Command-line interface tests, run in-process through parse_and_dispatch."""

import json

import pytest

from sigma2flow.cli import parse_and_dispatch
from sigma2flow.flow import MONITOR_COLUMNS


def run_cli(capsys, argv):
    rc = parse_and_dispatch(argv)
    return rc, capsys.readouterr()


def test_verify_ok(capsys, tmp_path):
    path = tmp_path / "verify.json"
    rc, _ = run_cli(capsys, ["verify", "--trials", "100", "--json", str(path)])
    assert rc == 0
    d = json.loads(path.read_text())
    assert d["command"] == "verify"
    assert d["status"] == "ok"
    assert d["sigma2_consistency"] < 1e-10
    assert d["divergence_residual"] < 1e-3
    assert d["refinement_gain"] > 3.0
    assert d["round_sigma2"] == 2.5
    assert d["Y2_sphere"] == pytest.approx(39.003151786888736, rel=1e-12)
    assert "backend" in d and "version" in d and "config" in d


def test_flow_smoke(capsys, tmp_path):
    csv = tmp_path / "trace.csv"
    rc, cap = run_cli(capsys, [
        "flow", "--grid-points", "64", "--t-max", "0.5", "--tol-converge", "0",
        "--record-dt", "0.1", "--csv", str(csv)])
    assert rc == 0
    d = json.loads(cap.out)
    assert d["command"] == "flow"
    assert d["status"] == "t_max"
    assert d["t"] == pytest.approx(0.5, abs=1e-9)
    assert d["max_V_drift"] < 1e-9
    assert d["max_step_F2_increase"] <= 1e-10 * abs(d["F2"])
    assert "wall_time" not in d
    lines = csv.read_text().splitlines()
    assert lines[0] == ",".join(MONITOR_COLUMNS)
    assert len(lines) >= 5


def test_flow_reruns_are_byte_identical(capsys, tmp_path):
    outputs = []
    for tag in ("a", "b"):
        csv = tmp_path / f"{tag}.csv"
        js = tmp_path / f"{tag}.json"
        rc, _ = run_cli(capsys, [
            "flow", "--grid-points", "64", "--t-max", "0.3", "--tol-converge", "0",
            "--record-dt", "0.1", "--csv", str(csv), "--json", str(js)])
        assert rc == 0
        outputs.append((csv.read_bytes(), js.read_bytes()))
    assert outputs[0] == outputs[1]


def test_eigen(capsys):
    rc, cap = run_cli(capsys, ["eigen", "--grid-points", "64"])
    assert rc == 0
    d = json.loads(cap.out)
    assert d["status"] == "converged"
    assert d["lambda1"] == pytest.approx(2.5, abs=1e-7)


def test_continuation(capsys):
    rc, cap = run_cli(capsys, ["continuation", "--ladder", "2.0,1.5",
                               "--grid-points", "64"])
    assert rc == 0
    d = json.loads(cap.out)
    assert d["status"] == "converged"
    assert [r["eps"] for r in d["rungs"]] == [2.0, 1.5]
    for rung in d["rungs"]:
        assert rung["status"] == "converged"
        assert rung["Y2_estimate"] == pytest.approx(39.003151786888736, rel=1e-3)
    assert d["rungs"][0]["Y_eps"] == pytest.approx(2.5, abs=1e-7)


def test_construct_defaults(capsys):
    rc, cap = run_cli(capsys, ["construct"])
    assert rc == 0
    d = json.loads(cap.out)
    assert d["status"] == "ok"
    assert d["eps_margin"] == pytest.approx(0.08)
    assert d["delta"] == pytest.approx(0.06309573444801933, rel=1e-12)
    assert d["delta1"] == pytest.approx(0.17770797337111816, rel=1e-9)
    assert d["b0"] == pytest.approx(1.0495454590284963, rel=1e-9)
    assert d["b1"] == pytest.approx(0.5760522185134601, rel=1e-9)
    assert d["margin"] == pytest.approx(-6.544570153721452e-05, rel=1e-4)
    assert d["beta_in_proof_range"] is False  # beta = 0.3 > (n-4)/(2n)
    assert d["beta_warning"] is True
    names = [r["name"] for r in d["regions"]]
    assert names[0] == "bubble" and names[-1] == "outer"
    assert all({"energy", "volume", "min_sigma1", "min_sigma2", "in_cone"}
               <= set(r) for r in d["regions"])


def test_construct_failure_returns_numeric_error(capsys):
    rc, cap = run_cli(capsys, ["construct", "--gamma", "1.99"])
    assert rc == 3
    d = json.loads(cap.out)
    assert d["status"] == "error"
    assert d["error"].startswith("[glue]")


def test_sweep(capsys):
    rc, cap = run_cli(capsys, ["sweep", "--lambdas", "1e-3,1e-4"])
    assert rc == 0
    d = json.loads(cap.out)
    assert d["status"] == "ok"
    assert d["all_margins_positive"] is True
    assert all(m > 0 for m in d["margins"])
    assert d["K2_rel_dev"] < 0.1


def test_inadmissible_start_exits_numeric(capsys):
    rc, cap = run_cli(capsys, ["flow", "--grid-points", "64", "--amplitude", "3.0",
                               "--t-max", "0.5"])
    assert rc == 3
    d = json.loads(cap.out)
    assert d["status"] == "cone_exit"


def test_usage_errors(capsys):
    cases = [
        ["flow", "--n", "3"],
        ["flow", "--init", "sawtooth"],
        ["flow", "--grid-points", "8"],
        ["verify", "--n", "4"],
        ["sweep", "--deltaR", "0.0"],
        ["construct", "--radii", "1,2,3"],
        ["construct", "--beta", "0.6"],
        ["nonsense"],
    ]
    for argv in cases:
        rc, cap = run_cli(capsys, argv)
        assert rc == 2, argv


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# smoke config\n"
        "amplitude = 0.05\n"
        "t-max = 0.2\n"
        "grid-points = 64\n")
    rc, cap = run_cli(capsys, ["flow", "--config", str(cfg), "--t-max", "0.1",
                               "--tol-converge", "0"])
    assert rc == 0
    d = json.loads(cap.out)
    assert d["config"]["amplitude"] == 0.05  # from the file
    assert d["config"]["t_max"] == 0.1  # flag beats file
    assert d["config"]["grid_points"] == 64
    assert d["config"]["eps"] == 2.0  # untouched default


def test_config_file_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("amplituude = 0.05\n")
    rc, cap = run_cli(capsys, ["flow", "--config", str(cfg)])
    assert rc == 2
    assert "unknown config key" in cap.err


def test_missing_config_file(capsys):
    rc, cap = run_cli(capsys, ["flow", "--config", "/no/such/file.cfg"])
    assert rc == 2


def test_unwritable_json_is_io_error(capsys):
    rc, cap = run_cli(capsys, ["verify", "--trials", "5",
                               "--json", "/no/such/dir/out.json"])
    assert rc == 4


def test_version_flag(capsys):
    assert parse_and_dispatch(["--version"]) == 0
    capsys.readouterr()
