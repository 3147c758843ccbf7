from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from peakcount.cli import main
from peakcount.config import RunConfig, parse_config
from peakcount.errors import ParseError, ValidationError
from peakcount.poly import SparsePoly
from peakcount.report import REPORT_ORDER, dumps

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
EXAMPLE = CONFIGS / "example_two_peaks.yaml"
ODD = CONFIGS / "odd_monomial.yaml"


def write(tmp_path: Path, text: str, name: str = "run.yaml") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_example_config():
    cfg = parse_config(EXAMPLE)
    assert isinstance(cfg, RunConfig)
    assert (cfg.p, cfg.dim) == (2.0, 3)
    assert cfg.polynomial == SparsePoly(2, {(5, 0): 1.0, (1, 4): -1.0})
    assert cfg.psi is None


def test_missing_p(tmp_path):
    path = write(tmp_path, "dim: 3\nprofile:\n  - {exponents: [4, 0], coeff: 1}\n")
    with pytest.raises(ValidationError, match="p required"):
        parse_config(path)


def test_profile_and_psi_together(tmp_path):
    path = write(
        tmp_path,
        "p: 2\ndim: 2\nprofile:\n  - {exponents: [4], coeff: 1}\npsi:\n  powers: {4: 1}\n",
    )
    with pytest.raises(ValidationError, match="exactly one"):
        parse_config(path)


def test_parse_error_carries_line_and_field(tmp_path):
    path = write(tmp_path, "p: 2\ndim: 3\ntolerances:\n  zero_tol: abc\nprofile:\n  - {exponents: [4, 0], coeff: 1}\n")
    with pytest.raises(ParseError) as info:
        parse_config(path)
    assert info.value.line == 4
    assert info.value.field == "tolerances.zero_tol"


def test_malformed_yaml_has_line(tmp_path):
    path = write(tmp_path, "p: 2\ndim: [3\n")
    with pytest.raises(ParseError) as info:
        parse_config(path)
    assert info.value.line is not None


@pytest.mark.parametrize("key, value", [("zero_tol", "-1e-9"), ("quad_tol", "0"), ("box_radius", "-2")])
def test_non_positive_tolerance_rejected(tmp_path, key, value):
    path = write(tmp_path, f"p: 2\ndim: 3\ntolerances:\n  {key}: {value}\nprofile:\n  - {{exponents: [4, 0], coeff: 1}}\n")
    with pytest.raises(ValidationError):
        parse_config(path)


def test_profile_round_trip(tmp_path):
    cfg = parse_config(EXAMPLE)
    out = tmp_path / "reduce.json"
    assert main(["reduce", "--config", str(EXAMPLE), "--json", str(out), "--quiet"]) == 0
    mono = json.loads(out.read_text())["profile"]["monomials"]
    assert SparsePoly.from_monomials(mono) == cfg.polynomial


def test_classify_example(tmp_path):
    out = tmp_path / "report.json"
    assert main(["classify", "--config", str(EXAMPLE), "--json", str(out), "--quiet"]) == 0
    report = json.loads(out.read_text())
    assert list(report) == [k for k in REPORT_ORDER if k in report]
    assert report["verdict"]["predicted_count"] == 2
    assert report["verdict"]["exact"] is True


def test_classify_odd_monomial(tmp_path):
    out = tmp_path / "report.json"
    assert main(["classify", "--config", str(ODD), "--json", str(out), "--quiet"]) == 0
    verdict = json.loads(out.read_text())["verdict"]
    assert verdict["predicted_count"] == 0
    assert verdict["shortcut"] == "proposition_odd_monomial"


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["classify", "--config", str(EXAMPLE), "--json", str(a), "--quiet"]) == 0
    assert main(["classify", "--config", str(EXAMPLE), "--json", str(b), "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_floats_round_trip_losslessly():
    values = [0.1, 1 / 3, 27.27433797310747, -1e-300, 2.0**-1074]
    back = json.loads(dumps({"x": values}))["x"]
    assert back == values


def test_flags_override_config(tmp_path):
    out = tmp_path / "report.json"
    assert main(["classify", "--config", str(EXAMPLE), "--p", "3", "--json", str(out), "--quiet"]) == 0
    report = json.loads(out.read_text())
    assert report["params"]["p"] == 3.0
    assert report["verdict"]["predicted_count"] == 2


def test_ground_state_csv(tmp_path):
    out = tmp_path / "gs.csv"
    assert main(["ground-state", "--p", "3", "--dim", "2", "--csv", str(out), "--quiet"]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "U", "dU", "residual"]
    assert float(rows[1][0]) == 0.0
    assert float(rows[1][1]) == pytest.approx(2.2062008646507163, rel=1e-9)


def test_moments_subcommand(tmp_path, capsys):
    assert main(["moments", "--p", "2", "--dim", "3", "--max-order", "4", "--quiet"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["moments"]["c"]["2"] == pytest.approx(27.27433797310747, rel=1e-9)


def test_zeros_subcommand(capsys):
    assert main(["zeros", "--config", str(EXAMPLE), "--quiet"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data["zeros"]["zeros"]) == 2


def test_curvature_subcommand(capsys):
    assert main(["curvature", "--psi", "5:1", "--quiet"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["verdict"]["curvature_analysis"]["verdict"] == "no_solution"


def test_curvature_crosscheck(capsys):
    assert main(["curvature", "--psi", "4:1", "--p", "3", "--crosscheck", "--quiet"]) == 0
    cc = json.loads(capsys.readouterr().out)["verdict"]["crosscheck"]
    assert cc["agrees"] and cc["pipeline_count"] == 1


def test_exit_code_for_bad_config(tmp_path):
    path = write(tmp_path, "dim: 3\n")
    assert main(["classify", "--config", str(path), "--quiet"]) == 2
    assert main(["classify", "--config", str(tmp_path / "missing.yaml"), "--quiet"]) == 2


def test_stage_error_writes_partial_report(tmp_path):
    path = write(tmp_path, "p: 2\ndim: 3\nprofile:\n  - {exponents: [4, 0], coeff: 1}\n  - {exponents: [1, 4], coeff: 1}\n")
    out = tmp_path / "partial.json"
    assert main(["classify", "--config", str(path), "--json", str(out), "--quiet"]) == 1
    partial = json.loads(out.read_text())
    assert "params" in partial and "verdict" not in partial


@pytest.mark.slow
def test_selftest_exit_code_reflects_failures(capsys):
    code = main(["selftest"])
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) == 10
    failed = sum(ln.startswith("FAIL") for ln in lines)
    assert code == (1 if failed else 0)


def test_exponent_literal_tolerance(tmp_path):
    path = write(tmp_path, "p: 2\ndim: 3\ntolerances:\n  zero_tol: 1e-9\nprofile:\n  - {exponents: [4, 0], coeff: 1}\n")
    assert parse_config(path).tolerances.zero_tol == 1e-9
