from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from peakcount.errors import DegreeTooLow, DimensionMismatch, NotHomogeneous
from peakcount.poly import (
    SparsePoly,
    check_flatness_condition,
    detect_odd_monomial_form,
    poly_eval,
    poly_grad,
    poly_laplacian,
    validate_profile,
)

EXAMPLE = SparsePoly(2, {(5, 0): 1.0, (1, 4): -1.0})
HARMONIC = SparsePoly(2, {(4, 0): 1.0, (2, 2): -6.0, (0, 4): 1.0})


def _poly_strategy(num_vars: int, max_degree: int, homogeneous: bool = False):
    def build(draw_terms):
        return SparsePoly(num_vars, dict(draw_terms))

    if homogeneous:
        # cut points of a composition of max_degree into num_vars parts
        cuts = st.lists(st.integers(0, max_degree), min_size=num_vars - 1, max_size=num_vars - 1)
        exps = cuts.map(lambda c: tuple(b - a for a, b in zip([0] + sorted(c), sorted(c) + [max_degree])))
    else:
        exps = st.lists(st.integers(0, max_degree), min_size=num_vars, max_size=num_vars).map(tuple)
        exps = exps.filter(lambda e: sum(e) <= max_degree)
    coeffs = st.floats(-3, 3, allow_nan=False).filter(lambda c: abs(c) > 1e-3)
    return st.lists(st.tuples(exps, coeffs), min_size=1, max_size=6).map(build)


def test_gradient_of_example():
    gx, gy = poly_grad(EXAMPLE)
    assert gx == SparsePoly(2, {(4, 0): 5.0, (0, 4): -1.0})
    assert gy == SparsePoly(2, {(1, 3): -4.0})


def test_laplacian_of_example():
    assert poly_laplacian(EXAMPLE) == SparsePoly(2, {(3, 0): 20.0, (1, 2): -12.0})


def test_laplacian_of_harmonic_quartic_is_zero():
    assert poly_laplacian(HARMONIC).is_zero()


def test_against_sympy():
    y1, y2 = sp.symbols("y1 y2")
    expr = y1**5 - y1 * y2**4 + 3 * y1**2 * y2**3
    q = SparsePoly(2, {(5, 0): 1.0, (1, 4): -1.0, (2, 3): 3.0})
    lap = sp.Poly(sp.diff(expr, y1, 2) + sp.diff(expr, y2, 2), y1, y2)
    want = {tuple(m): float(c) for m, c in zip(lap.monoms(), lap.coeffs())}
    assert q.laplacian().terms == want
    grad_lap = sp.Poly(sp.diff(sp.diff(expr, y1, 2) + sp.diff(expr, y2, 2), y2), y1, y2)
    want = {tuple(m): float(c) for m, c in zip(grad_lap.monoms(), grad_lap.coeffs())}
    assert q.laplacian().diff(1).terms == want


def test_canonical_form_drops_zeros():
    p = SparsePoly(2, {(1, 0): 1.0}) + SparsePoly(2, {(1, 0): -1.0})
    assert p.is_zero()
    assert len(p) == 0


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        SparsePoly(2, {(1,): 1.0})
    with pytest.raises(DimensionMismatch):
        EXAMPLE + SparsePoly(3, {(1, 0, 0): 1.0})
    with pytest.raises(DimensionMismatch):
        poly_eval(EXAMPLE, [1.0, 2.0, 3.0])


def test_from_monomials_round_trip():
    mono = EXAMPLE.to_monomials()
    assert SparsePoly.from_monomials(mono) == EXAMPLE


def test_validate_profile_examples():
    assert validate_profile(EXAMPLE).alpha == 4
    with pytest.raises(DegreeTooLow):
        validate_profile(SparsePoly(2, {(2, 0): 1.0}))
    with pytest.raises(NotHomogeneous):
        validate_profile(SparsePoly(2, {(4, 0): 1.0, (0, 3): 1.0}))
    with pytest.raises(NotHomogeneous):
        validate_profile(SparsePoly(2))


def test_flatness_on_example_minimum_is_sqrt72():
    # |∇ΔQ|^2 = 4608 x^2 - 1152 x + 144 with x = cos^2 θ: minimum 72 at x = 1/8
    theta = np.linspace(0, 2 * np.pi, 200001)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    field = EXAMPLE.laplacian().grad()
    dense = np.sqrt(sum(g(pts) ** 2 for g in field)).min()
    res = check_flatness_condition(validate_profile(EXAMPLE))
    assert res.holds
    assert res.min_grad_laplacian_norm == pytest.approx(math.sqrt(72.0), rel=1e-10)
    assert res.min_grad_laplacian_norm == pytest.approx(dense, rel=1e-8)
    assert res.argmin[0] ** 2 == pytest.approx(1 / 8, rel=1e-6)
    assert res.certified and res.lower_bound > 0


def test_flatness_norm_at_axis_points_of_example():
    field = EXAMPLE.laplacian().grad()
    at = np.array([0.0, 1.0])
    assert math.hypot(*(g(at) for g in field)) == pytest.approx(12.0)


def test_flatness_fails_for_harmonic():
    res = check_flatness_condition(validate_profile(HARMONIC))
    assert not res.holds
    assert res.min_grad_laplacian_norm == 0.0


def test_flatness_constant_norm_quartic():
    res = check_flatness_condition(validate_profile(SparsePoly(2, {(4, 0): 1.0, (0, 4): 1.0})))
    assert res.holds
    assert res.min_grad_laplacian_norm == pytest.approx(24.0, rel=1e-12)


def test_flatness_one_variable():
    res = check_flatness_condition(validate_profile(SparsePoly.from_powers({4: 1.0})))
    assert res.holds and res.min_grad_laplacian_norm == pytest.approx(24.0)


def test_flatness_three_variables():
    q = validate_profile(SparsePoly(3, {(4, 0, 0): 1.0, (0, 4, 0): 1.0, (0, 0, 4): 1.0}))
    res = check_flatness_condition(q)
    assert res.holds
    assert res.min_grad_laplacian_norm == pytest.approx(24.0, rel=1e-6)


@pytest.mark.parametrize(
    "q, applies, odd",
    [
        (EXAMPLE, False, []),
        (SparsePoly(2, {(3, 0): 2.0, (0, 4): 1.0}), True, [1]),
        (SparsePoly(2, {(4, 0): 1.0, (0, 6): 1.0}), True, []),
        (SparsePoly(2, {(5, 0): 1.0}), False, []),
        (SparsePoly(2, {(2, 0): 1.0, (0, 3): 1.0}), False, []),
    ],
)
def test_detect_odd_monomial_form(q, applies, odd):
    res = detect_odd_monomial_form(q)
    assert res.applies is applies
    assert res.odd_axes == odd


def test_linear_substitution_rotation():
    c, s = math.cos(0.3), math.sin(0.3)
    r = np.array([[c, -s], [s, c]])
    rotated = EXAMPLE.linear_substitution(r)
    x = np.array([0.4, -1.1])
    assert rotated(x) == pytest.approx(EXAMPLE(r @ x), rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(p=_poly_strategy(2, 8), seed=st.integers(0, 10_000))
def test_gradient_matches_finite_differences(p, seed):
    rng = np.random.default_rng(seed)
    h = 1e-6
    for x in rng.uniform(-1, 1, size=(10, 2)):
        g = poly_grad(p, x)
        fd = np.array([(p(x + h * e) - p(x - h * e)) / (2 * h) for e in np.eye(2)])
        scale = max(1.0, float(np.max(np.abs(g))), sum(abs(c) for _, c in p.items()))
        assert np.max(np.abs(g - fd)) <= 1e-6 * scale


@settings(max_examples=40, deadline=None)
@given(p=_poly_strategy(3, 5, homogeneous=True), seed=st.integers(0, 10_000))
def test_euler_identity(p, seed):
    x = np.random.default_rng(seed).normal(size=3)
    lhs = float(np.dot(x, poly_grad(p, x)))
    rhs = 5 * p(x)
    scale = sum(abs(c) for _, c in p.items()) * np.linalg.norm(x) ** 5
    assert abs(lhs - rhs) <= 1e-10 * max(scale, 1e-300)


@settings(max_examples=40, deadline=None)
@given(p=_poly_strategy(2, 6), q=_poly_strategy(2, 6), a=st.integers(-5, 5), b=st.integers(-5, 5))
def test_laplacian_linearity(p, q, a, b):
    lhs = (p * float(a) + q * float(b)).laplacian()
    rhs = p.laplacian() * float(a) + q.laplacian() * float(b)
    keys = set(lhs.terms) | set(rhs.terms)
    for k in keys:
        assert lhs.terms.get(k, 0.0) == pytest.approx(rhs.terms.get(k, 0.0), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(p=_poly_strategy(2, 6), q=_poly_strategy(2, 6), seed=st.integers(0, 1000))
def test_product_evaluates_pointwise(p, q, seed):
    x = np.random.default_rng(seed).uniform(-1.5, 1.5, size=2)
    assert (p * q)(x) == pytest.approx(p(x) * q(x), rel=1e-10, abs=1e-10)
