import csv
import json
import shutil
import subprocess

import pytest

from eymah import cli


def run(args, tmp_path):
    return cli.main(args + ["--output", str(tmp_path)])


def test_help_lists_exit_codes(capsys):
    assert cli.main(["--help"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    for code in range(9):
        assert f"\n  {code}  " in out


def test_usage_errors(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["indicial", "--kind", "spinor"]) == cli.EXIT_USAGE


def test_indicial_lichnerowicz_writes_json_and_csv(tmp_path, capsys):
    code = run(["indicial", "--kind", "lichnerowicz", "--n", "3", "--mu", "3"], tmp_path)
    assert code == cli.EXIT_OK
    rec = json.loads((tmp_path / "indicial.json").read_text())
    assert rec["schema"] == cli.SCHEMA and rec["command"] == "indicial"
    assert rec["result"]["closed_form"]["interval"] == [0.0, 3.0]
    assert rec["result"]["max_root_difference"] < 1e-10
    rows = list(csv.DictReader((tmp_path / "indicial.csv").open()))
    assert {r["source"] for r in rows} == {"closed-form", "numeric"}
    assert "non-indicial interval: (0, 3)" in capsys.readouterr().out


def test_degenerate_gap_exit_code(tmp_path):
    assert run(["indicial", "--kind", "lichnerowicz", "--n", "3", "--mu", "0.5"], tmp_path) == cli.EXIT_GAP


def test_missing_kind_is_a_config_error(tmp_path):
    assert run(["indicial"], tmp_path) == cli.EXIT_CONFIG


def test_weight_outside_interval(tmp_path, capsys):
    code = run(["solve-linear", "--block", "connection", "--weight", "2.5", "--nodes", "32"], tmp_path)
    assert code == cli.EXIT_WEIGHT
    assert "(1, 2)" in capsys.readouterr().err


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["indicial", "--kind", "bianchi_composite", "--n", "4"]
    assert cli.main(args + ["--output", str(a)]) == 0
    assert cli.main(args + ["--output", str(b)]) == 0
    for name in ("indicial.json", "indicial.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["indicial", "--kind", "scalar", "--n", "3", "--format", "json", "--name", "scal"]) == 0
    assert (tmp_path / "env" / "scal.json").exists()
    assert not (tmp_path / "env" / "scal.csv").exists()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("kind: lichnerowicz\nn: 4\nmu: 5.0\noutput:\n  name: from-file\n")
    assert cli.main(["indicial", "--config", str(cfg), "--mu", "4.0", "--output", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "from-file.json").read_text())
    assert rec["result"]["closed_form"]["mu"] == 4.0 and rec["result"]["closed_form"]["n"] == 4


def test_malformed_yaml_reports_position(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("kind: scalar\nn: [3\n")
    assert cli.main(["indicial", "--config", str(cfg)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line" in err and "column" in err


def test_unknown_config_field(tmp_path, capsys):
    cfg = tmp_path / "typo.yaml"
    cfg.write_text("kind: scalar\nnewton:\n  tolerance: 1e-9\n")
    assert cli.main(["indicial", "--config", str(cfg)]) == cli.EXIT_CONFIG
    assert "newton.tolerance" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["indicial", "--kind", "scalar", "--n", "1"],
    ["solve", "--n", "4"],
    ["solve", "--nodes", "8"],
    ["decay"],
])
def test_invalid_values_are_config_errors(args, tmp_path):
    assert run(args, tmp_path) == cli.EXIT_CONFIG


def test_verify_reports_and_exits_cleanly(tmp_path, capsys):
    assert run(["verify", "--seed", "1"], tmp_path) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL bianchi-stress" in out and "(on-shell only)" in out
    rec = json.loads((tmp_path / "verify.json").read_text())
    assert len(rec["result"]["reports"]) == 7


def test_solve_then_decay(tmp_path, capsys):
    code = run(["solve", "--gamma-amp", "1e-3", "--nodes", "32", "--name", "flag"], tmp_path)
    assert code == cli.EXIT_OK
    rec = json.loads((tmp_path / "flag.json").read_text())["result"]
    assert rec["converged"] and rec["nodes"] == 32
    assert run(["decay", "--input", str(tmp_path / "flag.csv"), "--name", "fit"], tmp_path) == cli.EXIT_OK
    fit = json.loads((tmp_path / "fit.json").read_text())["result"]["fit"]
    assert fit["exponent"] == pytest.approx(rec["decay"]["a"]["exponent"], rel=1e-12)


def test_nonconvergence_exit_code_keeps_partial_output(tmp_path):
    code = run(["solve", "--gamma-amp", "1e-3", "--nodes", "32", "--max-iter", "1"], tmp_path)
    assert code == cli.EXIT_NONCONVERGENCE
    assert json.loads((tmp_path / "solve.json").read_text())["result"]["converged"] is False


def test_decay_input_must_have_columns(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("rho,value\n0.1,1.0\n")
    assert run(["decay", "--input", str(bad)], tmp_path) == cli.EXIT_CONFIG


@pytest.mark.skipif(shutil.which("eymah") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(
        ["eymah", "indicial", "--kind", "scalar", "--n", "3", "--output", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "roots: 0, 3" in proc.stdout
