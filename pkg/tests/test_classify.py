from __future__ import annotations

import pytest
import sympy as sp

from peakcount.classify import (
    SHORTCUT_ODD_MONOMIAL,
    classify_domain,
    crosscheck_1d,
    crosscheck_1d_details,
    curvature_order,
    mean_curvature_eval,
)
from peakcount.config import config_from_mapping
from peakcount.errors import DegeneratePsi, StageError, ValidationError

EXAMPLE = [{"exponents": [5, 0], "coeff": 1}, {"exponents": [1, 4], "coeff": -1}]
ODD = [{"exponents": [3, 0], "coeff": 2}, {"exponents": [0, 4], "coeff": 1}]
HARMONIC = [
    {"exponents": [4, 0], "coeff": 1},
    {"exponents": [2, 2], "coeff": -6},
    {"exponents": [0, 4], "coeff": 1},
]


def classify(**data):
    return classify_domain(config_from_mapping(data))


def _check_invariants(report):
    c = report.conditions
    if report.exact and report.shortcut is None:
        assert c["flatness_holds"] and c["all_nondegenerate"] and not c["indeterminate_zeros_present"]
        assert report.predicted_count == report.count_lower_bound
    if not report.exact and report.predicted_count is not None:
        assert report.predicted_count == f">= {report.count_lower_bound}"


def test_example_exactly_two():
    r = classify(p=2, dim=3, profile=EXAMPLE)
    assert r.exact and r.predicted_count == 2
    assert len(r.xi_set) == 2
    assert r.conditions["flatness_holds"] and r.conditions["all_nondegenerate"]
    _check_invariants(r)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_example_count_is_independent_of_p(p):
    r = classify(p=p, dim=3, profile=EXAMPLE)
    assert r.exact and r.predicted_count == 2


def test_odd_monomial_shortcut():
    r = classify(p=2, dim=3, profile=ODD)
    assert r.predicted_count == 0 and r.exact
    assert r.shortcut == SHORTCUT_ODD_MONOMIAL
    assert r.to_dict()["verdict"]["shortcut"] == "proposition_odd_monomial"


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_shortcut_and_pipeline_agree(p):
    r = classify(p=p, dim=3, profile=ODD, full_pipeline=True)
    assert r.conditions["pipeline_agrees"]
    assert r.conditions["pipeline_stable_zeros"] == 0
    assert r.conditions["pipeline_min_field_norm"] > 0


def test_harmonic_is_lower_bound_only():
    r = classify(p=2, dim=3, profile=HARMONIC)
    assert not r.exact
    assert r.predicted_count == ">= 0"
    assert not r.conditions["flatness_holds"]
    assert not r.conditions["zero_set_finite"]
    _check_invariants(r)


def test_stage_attribution_for_bad_profile():
    with pytest.raises(StageError) as info:
        classify(p=2, dim=3, profile=[{"exponents": [4, 0], "coeff": 1}, {"exponents": [1, 4], "coeff": 1}])
    assert info.value.stage == "validate_profile"
    assert "params" in info.value.partial


def test_stage_attribution_for_bad_exponent():
    with pytest.raises(StageError) as info:
        classify(p=7, dim=3, profile=EXAMPLE)
    assert info.value.stage == "params"


@pytest.mark.parametrize(
    "powers, n, m, verdict, count",
    [
        ({4: 1}, 4, 2, "exactly_one", 1),
        ({5: 1}, 5, 3, "no_solution", 0),
        ({3: 1, 4: 1}, 3, 1, "no_solution", 0),
        ({2: 0.5}, 2, 0, "outside_theorem_scope", None),
    ],
)
def test_curvature_order(powers, n, m, verdict, count):
    res = curvature_order(powers)
    assert (res.n, res.m, res.verdict, res.count) == (n, m, verdict, count)


def test_curvature_order_errors():
    with pytest.raises(DegeneratePsi):
        curvature_order({4: 0.0})
    with pytest.raises(ValidationError):
        curvature_order({1: 1.0, 4: 1.0})


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 8])
def test_curvature_order_matches_symbolic_derivatives(n):
    # m is the order of the first nonvanishing derivative of H at 0
    t = sp.symbols("t")
    psi = t**n + 2 * t ** (n + 1)
    h = sp.diff(psi, t, 2) / (1 + sp.diff(psi, t) ** 2) ** sp.Rational(3, 2)
    m = next(k for k in range(12) if sp.simplify(sp.diff(h, t, k).subs(t, 0)) != 0)
    assert curvature_order({n: 1.0, n + 1: 2.0}).m == m


@pytest.mark.parametrize(
    "powers, t, expected",
    [({4: 1}, 0.0, 0.0), ({2: 0.5}, 0.0, 1.0), ({4: 1}, 1.0, 12 / 17**1.5)],
)
def test_mean_curvature_eval(powers, t, expected):
    assert mean_curvature_eval(powers, t) == pytest.approx(expected, rel=1e-15, abs=1e-300)


@pytest.mark.parametrize("n", [4, 5, 6, 7])
def test_curvature_and_reduction_agree(n, table_3_2):
    res = crosscheck_1d_details({n: 1.0}, 3.0, moments=table_3_2)
    assert res.agrees
    assert res.pipeline_count == curvature_order({n: 1.0}).count


def test_crosscheck_quartic_details(table_3_2):
    res = crosscheck_1d_details({4: 1.0}, 3.0, moments=table_3_2)
    assert res.zeros == [(0.0,)]
    assert res.derivative_at_zero == pytest.approx(12 * table_3_2.c_moment(2), rel=1e-12)


def test_crosscheck_sixth_power_is_nondegenerate(table_3_2):
    # L = 30 c4 ξ + 60 c2 ξ^3, so L'(0) = 30 c4 > 0
    res = crosscheck_1d_details({6: 1.0}, 3.0, moments=table_3_2)
    assert res.classifications == ["nondegenerate_stable"]
    assert res.derivative_at_zero == pytest.approx(30 * table_3_2.c_moment(4), rel=1e-12)


def test_crosscheck_boolean_form():
    assert crosscheck_1d({4: 1.0}, 2.0)


@pytest.mark.parametrize("n, count", [(4, 1), (5, 0), (6, 1)])
def test_curve_mode_classification(n, count):
    r = classify(p=3, psi={"powers": {n: 1}})
    assert r.exact and r.predicted_count == count
    assert r.curvature_analysis["count"] == count


def test_curve_mode_outside_scope():
    r = classify(p=3, psi={"powers": {2: 1, 4: 1}})
    assert r.predicted_count is None and not r.exact


def test_adding_indeterminate_zero_never_changes_certified_count():
    from peakcount.poly import SparsePoly
    from peakcount.reduction import ReducedField
    from peakcount.zeros import find_zeros

    clean = [SparsePoly(2, {(1, 0): 1.0}), SparsePoly(2, {(0, 1): 1.0})]
    # the factor (ξ1 - 3)^2 adds a degenerate zero of degree 0 at (3, 0)
    bump = SparsePoly(2, {(2, 0): 1.0, (1, 0): -6.0, (0, 0): 9.0})
    with_extra = [clean[0] * bump, clean[1]]
    a = find_zeros(ReducedField(2, clean, clean, clean[0], None, {}))
    b = find_zeros(ReducedField(2, with_extra, with_extra, clean[0], None, {}))
    assert [z.location for z in a.stable] == [(0.0, 0.0)]
    assert [z.location for z in b.stable] == [(0.0, 0.0)]
    assert [z.classification for z in b.zeros if not z.stable] == ["indeterminate"]
