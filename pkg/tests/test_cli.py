import json
import shutil

import pandas as pd
import pytest

from bw_workbench import cli
from bw_workbench.cli import RunConfig, main
from bw_workbench.dynamics import OracleError
from bw_workbench.symplectic import run_modified_bw
from tests.conftest import model_file


def _run(tmp_path, *args):
    path = tmp_path / "report.json"
    code = main([*args, "--json", str(path), "--output", "json"])
    return code, json.loads(path.read_text(encoding="utf-8"))


def test_compare_hypersphere_has_no_differences(tmp_path):
    code, payload = _run(tmp_path, model_file("hypersphere"), "--algo", "compare")
    assert code == 0
    comparison = payload["comparison"]
    assert comparison["entries"] == []
    assert comparison["excluded"] == ["phi1", "chi3"]
    assert comparison["verdicts"] == {"dirac": "brackets", "mbw": "brackets"}
    assert comparison["common_basis"] == ["q_1", "q_2", "q_3", "p_1", "p_2", "p_3"]
    assert payload["dirac"]["algorithm"] == "dirac"
    assert payload["mbw"]["verdict"] == {"kind": "brackets", "level": 2}


def test_toy_warns_about_missing_dirac_constraint(tmp_path):
    code, report = _run(tmp_path, model_file("toy"), "--algo", "mbw")
    assert code == 0
    missing = [w for w in report["warnings"] if w.startswith("Dirac constraint chi2 = ")]
    assert len(missing) == 1
    assert missing[0].endswith("is not generated by mbw")
    assert report["hamiltonian"] is not None
    assert set(report["equations"]) == {"x", "p_x", "y", "lambda1"}
    assert {c["check"] for c in report["checks"]} == {"antisymmetry", "jacobi", "inverse", "determinant"}
    assert all(c["passed"] for c in report["checks"])


def test_compare_with_classic_bw(tmp_path):
    code, payload = _run(tmp_path, model_file("toy"), "--algo", "compare", "--compare-with", "bw")
    assert code == 0
    entries = payload["comparison"]["entries"]
    assert [(e["kind"], e["side"], e["label"]) for e in entries] == [("constraint", "dirac-only", "chi2")]
    assert payload["comparison"]["verdicts"] == {"dirac": "symmetry", "bw": "brackets"}
    assert "bw" in payload


def test_eom_constraints_reproduce_the_dirac_chain(tmp_path):
    code, report = _run(tmp_path, model_file("toy"), "--algo", "mbw", "--eom-constraints")
    assert code == 0
    assert report["verdict"]["kind"] == "symmetry"
    gamma = [c for c in report["chain"] if c["origin"] == "eom-derived"]
    assert len(gamma) == 1
    assert "kappa1" in gamma[0]["expr"]
    assert "kappa1" in report["parameters"]
    assert not any(w.startswith("Dirac constraint") for w in report["warnings"])
    assert report["transformation"]["p_x"] == "0"
    assert report["delta_potential"] == "0"


def test_relativistic_hamiltonian(tmp_path):
    code, report = _run(tmp_path, model_file("relativistic"), "--algo", "mbw")
    assert code == 0
    assert report["hamiltonian"] == "c*p0"
    assert report["rewrites"] == ["p0^2 -> m^2*c^2 + p1^2 + p2^2 + p3^2"]
    assert report["levels"][0]["injected"] == ["Sigma"]


def test_dirac_report_extras(tmp_path):
    code, report = _run(tmp_path, model_file("relativistic"), "--algo", "dirac")
    assert code == 0
    assert report["levels"] == []
    assert report["extras"]["classification_before_gauge"] == [["phi", "first-class"]]
    assert report["extras"]["generators"][0]["variations"]["x0"] == "-2*p0"
    assert report["extras"]["dirac_matrix"]["labels"] == ["phi"]


def test_level_limit_exit_code(tmp_path):
    code, report = _run(tmp_path, model_file("hypersphere"), "--max-level", "1")
    assert code == 2
    assert report["verdict"]["kind"] == "level-limit"


def test_constant_override(tmp_path):
    code, report = _run(tmp_path, model_file("hypersphere"), "--set", "N=2")
    assert code == 0
    assert report["brackets"]["basis"] == ["q_1", "q_2", "p_1", "p_2", "eta1", "eta2"]


def test_reports_are_deterministic(tmp_path):
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    for path in (first, second):
        assert main([model_file("toy"), "--algo", "compare", "--json", str(path), "--output", "json"]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_default_report_path(tmp_path):
    target = tmp_path / "toy.model"
    shutil.copy(model_file("toy"), target)
    assert main([str(target), "--output", "json"]) == 0
    assert (tmp_path / "toy.report.json").exists()


def test_text_output(capsys):
    assert main([model_file("relativistic"), "--algo", "dirac"]) == 0
    out = capsys.readouterr().out
    assert "Verdict: brackets" in out
    assert "Classification" in out
    assert "Hamiltonian: c*p0" in out


def test_workbook_export(tmp_path):
    path = tmp_path / "toy.xlsx"
    code = main([model_file("toy"), "--algo", "compare", "--xlsx", str(path), "--json", str(tmp_path / "r.json")])
    assert code == 0
    sheets = pd.ExcelFile(path).sheet_names
    assert sheets == ["summary", "levels", "chain", "brackets", "checks", "diff"]
    diff = pd.read_excel(path, sheet_name="diff")
    assert list(diff["label"]) == ["chi2"]


def test_missing_model_file(tmp_path, capsys):
    assert main([str(tmp_path / "absent.model")]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_syntax_error_in_model(tmp_path, capsys):
    path = tmp_path / "broken.model"
    path.write_text("[variables]\nx : coordinate\n\n[potential]\nx +* 2\n", encoding="utf-8")
    assert main([str(path)]) == 1
    assert "line 5" in capsys.readouterr().err


def test_invalid_model_reports_diagnostics(tmp_path, capsys):
    path = tmp_path / "invalid.model"
    path.write_text("[variables]\nx : coordinate\nlam : multiplier\n\n[potential]\nlam*x\n", encoding="utf-8")
    assert main([str(path)]) == 1
    assert "multiplier-in-potential" in capsys.readouterr().err


def test_bad_assignment_is_rejected():
    with pytest.raises(SystemExit):
        main([model_file("hypersphere"), "--set", "N"])


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("toy.model", algorithm="lagrange")
    with pytest.raises(ValueError):
        RunConfig("toy.model", max_level=0)
    assert str(RunConfig("models/toy.model").report_path) == "models/toy.report.json"


def test_unevaluable_check_is_recorded_as_failed(monkeypatch, load):
    def all_poles(check, subject, trials, seed):
        raise OracleError(f"{check}: no regular point found")

    monkeypatch.setattr(cli, "numeric_oracle", all_poles)
    report = run_modified_bw(load("toy"))
    cli._attach_checks(report, RunConfig(model_file("toy"), oracle_trials=3, seed=2))
    assert [c.check for c in report.checks] == ["antisymmetry", "jacobi", "inverse", "determinant"]
    assert not any(c.passed for c in report.checks)
    assert all(c.witness is None for c in report.checks)
    assert "jacobi check found no point off the poles" in report.warnings
    assert "witness" not in report.checks[0].to_dict()
