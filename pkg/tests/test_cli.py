import json
import subprocess
import sys

import pytest

from nheuler import cli, suites
from nheuler.diagnostics import CriterionReport


def _config(tmp_path, name="c.json", **overrides):
    cfg = {"version": 1, "scenario": "homogeneous_vortex", "n": 32, "horizon": 0.2}
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_run_and_analyze(tmp_path, capsys):
    cfg = _config(tmp_path, scenario="density_patch_vortex", params={"contrast": 2.0}, n=64)
    out = tmp_path / "run"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--cadence", "2"]) == cli.EXIT_OK
    for name in ("series.csv", "criterion_report.json", "run.json", "config.json"):
        assert (out / name).is_file()
    assert sorted(p.name for p in (out / "checkpoints").iterdir())[0] == "state_000000.npz"
    stored = CriterionReport.from_json(out / "criterion_report.json")
    assert stored.K > 0
    capsys.readouterr()
    assert cli.main(["analyze", str(out)]) == cli.EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed == stored.to_dict()
    assert (out / "plot.csv").read_text().startswith("t,K,")


def test_homogeneous_criteria_zero(tmp_path):
    out = tmp_path / "h"
    assert cli.main(["run", "--config", str(_config(tmp_path)), "--out", str(out)]) == 0
    rep = json.loads((out / "criterion_report.json").read_text())
    assert rep["K"] == 0.0 and rep["sum_integral"] == 0.0 and rep["sup_dXu_b0"] == 0.0


def test_invalid_configs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1,\n "scenario": "homogeneous_vortex",\n "n": 32,,}')
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert "bad.json:3:" in capsys.readouterr().err
    wrong = _config(tmp_path, "w.json", scenario="stratified_shear", params={"contrast": 0.5})
    assert cli.main(["run", "--config", str(wrong)]) == cli.EXIT_CONFIG
    assert "contrast" in capsys.readouterr().err
    extra = _config(tmp_path, "e.json", solver={"cfl": 2.0})
    assert cli.main(["run", "--config", str(extra)]) == cli.EXIT_CONFIG
    assert "solver.cfl" in capsys.readouterr().err
    params = _config(tmp_path, "p.json", params={"bogus": 1})
    assert cli.main(["run", "--config", str(params)]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    assert cli.main(["frobnicate"]) == cli.EXIT_CONFIG


def test_failure_exit_codes(tmp_path):
    blow = _config(tmp_path, "b.json", scenario="stratified_shear", solver={"grad_ceiling": 0.5})
    assert cli.main(["run", "--config", str(blow), "--out", str(tmp_path / "b")]) == cli.EXIT_BLOWUP
    assert json.loads((tmp_path / "b" / "run.json").read_text())["status"] == "blow_up"
    press = _config(tmp_path, "p.json", scenario="density_patch_vortex", params={"contrast": 5.0},
                    solver={"pressure_max_iter": 1, "pressure_tol": 1e-14})
    assert cli.main(["run", "--config", str(press), "--out", str(tmp_path / "p")]) == cli.EXIT_PRESSURE


def test_analyze_data_errors(tmp_path, capsys):
    assert cli.main(["analyze", str(tmp_path / "nothing")]) == cli.EXIT_DATA
    out = tmp_path / "r"
    cli.main(["run", "--config", str(_config(tmp_path)), "--out", str(out)])
    lines = (out / "series.csv").read_text().splitlines()
    (out / "series.csv").write_text("\n".join(lines[:3]) + "\n")
    capsys.readouterr()
    assert cli.main(["analyze", str(out)]) == cli.EXIT_DATA
    assert "missing for t in" in capsys.readouterr().err


def test_determinism_and_seeds(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    cfg = _config(tmp_path, params={"noise": 0.2})
    assert cli.main(["run", "--config", str(cfg), "--seed", "1"]) == 0
    first = (tmp_path / "root" / "homogeneous_vortex-n32-seed1" / "series.csv").read_bytes()
    assert cli.main(["run", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "series.csv").read_bytes() == first
    assert cli.main(["--threads", "2", "run", "--config", str(cfg), "--seed", "2"]) == 0
    capsys.readouterr()
    reports = []
    for seed in (1, 2):
        cli.main(["analyze", str(tmp_path / "root" / f"homogeneous_vortex-n32-seed{seed}")])
        reports.append(json.loads(capsys.readouterr().out))
    assert reports[0].keys() == reports[1].keys()
    assert reports[0]["grad_u_integral"] != reports[1]["grad_u_integral"]


def test_verify(tmp_path, capsys, monkeypatch):
    report = tmp_path / "v.json"
    assert cli.main(["verify", "spectral", "--n", "32", "--out", str(report)]) == cli.EXIT_OK
    assert json.loads(report.read_text())["passed"] is True
    assert cli.main(["verify", "nonsense"]) == cli.EXIT_CONFIG
    monkeypatch.setitem(suites._SUITE_FUNCS, "spectral",
                        lambda n, seed: [suites.Check("always-fails", 2.0, 1.0)])
    capsys.readouterr()
    assert cli.main(["verify", "spectral"]) == cli.EXIT_VERIFY
    assert "always-fails" in capsys.readouterr().err


def test_identities_suite_via_cli(capsys):
    assert cli.main(["verify", "identities"]) == cli.EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert all(c["observed"] <= 1e-8 for c in res["checks"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nheuler", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "nheuler" in proc.stdout
