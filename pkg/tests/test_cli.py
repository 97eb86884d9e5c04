import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from svridge.cli import build_parser, main

SUBCOMMANDS = ("fit", "scan", "simulate", "basis-dump")


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    x = np.linspace(-2, 2, 60)
    y = np.sin(x) + 2 * np.exp(-30 * x**2) + rng.normal(0, 0.2, x.size)
    path = tmp_path / "data.csv"
    path.write_text("x1,y\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, y)))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _snapshot(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir())}


@pytest.mark.parametrize("command", SUBCOMMANDS)
def test_help_lists_every_flag_with_default(command, capsys):
    with pytest.raises(SystemExit) as stop:
        main([command, "--help"])
    assert stop.value.code == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[command]
    formatter = sub._get_formatter()
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
        takes_value = action.nargs != 0
        if action.option_strings and takes_value and not action.required:
            assert "default" in formatter._get_help_string(action), action.dest


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "svridge", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for command in SUBCOMMANDS:
        assert command in res.stdout


def test_basis_dump_rows(tmp_path):
    assert main(["basis-dump", "--m", "5", "--domain", "-2:2", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "basis.csv")
    assert rows[0] == ["index", "c1", "width"]
    assert len(rows) == 6
    assert [float(r[1]) for r in rows[1:]] == [-2.0, -1.0, 0.0, 1.0, 2.0]
    doc = json.loads((tmp_path / "basis.json").read_text())
    assert doc["width"] == 1.0


def test_basis_dump_2d(tmp_path):
    assert main(["basis-dump", "--m", "3", "--domain", "0:1,0:1", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "basis.csv")
    assert rows[0] == ["index", "c1", "c2", "width"] and len(rows) == 10


def test_ridge_fit_writes_artifacts(data_csv, tmp_path):
    out = tmp_path / "o"
    assert main(["fit", "--method", "ridge", "--select", str(data_csv), "--out", str(out)]) == 0
    assert {"fit.json", "gic.json", "curve.csv"} <= set(_snapshot(out))
    curve = _rows(out / "curve.csv")
    assert len(curve) == 513
    fit = json.loads((out / "fit.json").read_text())
    assert fit["method"] == "ridge" and fit["converged"]
    gic = json.loads((out / "gic.json").read_text())
    assert gic["total"] == gic["neg2_loglik"] + gic["bias_term"]


def test_svr_fit_without_gammas_scans(data_csv, tmp_path, capsys):
    code = main(["fit", "--method", "svr", str(data_csv), "--out", str(tmp_path),
                 "--gamma1-grid", "1e-3,1e-1", "--gamma2-grid", "1e-3"])
    assert code == 0
    assert "scanned 2 grid points" in capsys.readouterr().err
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert any("scanned" in note for note in fit["notes"])


def test_svr_fit_fixed_gammas(data_csv, tmp_path):
    assert main(["fit", str(data_csv), "--gamma1", "0.01", "--gamma2", "0.001",
                 "--out", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["lambda_state"]["gamma1"] == 0.01


def test_scan_two_by_two(data_csv, tmp_path):
    assert main(["scan", str(data_csv), "--gamma1-grid", "1e-3,1e-1", "--gamma2-grid", "1e-3:1e-2:2",
                 "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "scan.csv")
    assert rows[0][:3] == ["gamma1", "gamma2", "gic"]
    assert len(rows) == 5
    best = json.loads((tmp_path / "scan_best.json").read_text())
    finite = [float(r[2]) for r in rows[1:] if r[2] != "nan"]
    assert best["gic"]["total"] == min(finite)


def test_scan_with_truth_adds_mse(data_csv, tmp_path):
    assert main(["scan", str(data_csv), "--gamma1-grid", "1e-2", "--gamma2-grid", "1e-3",
                 "--truth", "peak10", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "scan.csv")
    assert rows[0][-1] == "mse" and 0 < float(rows[1][-1]) < 0.1


def test_simulate_report_and_reruns_identical(tmp_path):
    args = ["simulate", "--function", "chirp11", "--n", "100", "--alpha", "0.05", "--trials", "5",
            "--seed", "1", "--gamma1-grid", "1e-3,1", "--gamma2-grid", "1e-3", "--threads", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    a, b = _snapshot(tmp_path / "a"), _snapshot(tmp_path / "b")
    assert a == b
    assert set(a) == {"report.json", "trials.csv", "curve_svr.csv", "curve_ridge.csv"}
    doc = json.loads(a["report.json"])
    assert doc["summary"]["svr"]["n_trials"] == 5
    assert len(_rows(tmp_path / "a" / "trials.csv")) == 6


def test_fit_reruns_identical(data_csv, tmp_path):
    args = ["fit", "--method", "ridge", str(data_csv)]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert _snapshot(tmp_path / "a") == _snapshot(tmp_path / "b")


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SVRIDGE_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["basis-dump", "--m", "4", "--domain", "0:1"]) == 0
    assert (tmp_path / "env" / "basis.csv").exists()


def test_missing_dataset_exits_two(tmp_path, capsys):
    code = main(["fit", "--method", "ridge", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "dataset: not found" and err["exit"] == 2


def test_malformed_table_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,y\n0,1\n1,oops\n")
    assert main(["fit", str(bad), "--method", "ridge", "--out", str(tmp_path)]) == 2
    line = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(line)["type"] == "DataError"


def test_numerical_failure_exits_one(tmp_path, capsys):
    # two points, two centres: every lambda interpolates the data
    path = tmp_path / "tiny.csv"
    path.write_text("x1,y\n0,1\n1,3\n")
    code = main(["fit", str(path), "--method", "ridge", "--lam", "0", "--m", "2", "--out", str(tmp_path)])
    assert code == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["exit"] == 1


def test_bad_grid_is_usage_error():
    with pytest.raises(SystemExit) as stop:
        main(["scan", "x.csv", "--gamma1-grid", "0:1:3"])
    assert stop.value.code == 2
