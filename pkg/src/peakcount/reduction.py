"""Polynomial form of the reduced vector field ``L(ξ) = ∫ e(|y|) ∇Q(y + ξ) dy``.

Taylor-expanding ``∂_iQ(y + ξ)`` in ``y`` and integrating term by term gives

    L_i(ξ) = Σ_{γ even} (M_γ / γ!) ∂^γ ∂_iQ(ξ),

which is exact for polynomial ``Q``: the only numerical input is the moment
table.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, MomentUnavailable
from .ground_state import eval_profile
from .poly import Profile, SparsePoly
from .weight import MomentTable, stage_threads

__all__ = [
    "ReducedField",
    "reduce_field",
    "field_eval",
    "field_jacobian",
    "brute_force_field",
    "multi_factorial",
]

_PRUNE_REL_TOL = 1e-7


def multi_factorial(gamma: Sequence[int]) -> float:
    """``γ! = Π γ_j!``, through ``lgamma`` once ``|γ| > 20``."""
    if sum(gamma) > 20:
        return math.exp(sum(math.lgamma(g + 1) for g in gamma))
    return float(math.prod(math.factorial(g) for g in gamma))


@dataclass(frozen=True, eq=False)
class ReducedField:
    """``L`` as ``d`` polynomials in ``ξ``.

    Attributes
    ----------
    components : list of SparsePoly
        Pruned components.
    raw_components : list of SparsePoly
        Components before pruning, for diagnostics.
    pruned : list of dict
        One entry per dropped coefficient: component, exponents, value, scale.
    moments_used : dict
        ``γ -> M_γ`` for every moment entering the expansion.
    """

    d: int
    components: list[SparsePoly]
    raw_components: list[SparsePoly]
    profile: SparsePoly
    moments: MomentTable | None
    moments_used: dict[tuple[int, ...], float]
    pruned: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        jac = [[c.diff(j) for j in range(self.d)] for c in self.components]
        object.__setattr__(self, "_jacobian", jac)

    @property
    def jacobian_polys(self) -> list[list[SparsePoly]]:
        return self._jacobian

    @property
    def scale(self) -> float:
        """Largest coefficient magnitude over all components."""
        return max((c.max_abs_coeff() for c in self.components), default=0.0)

    def is_identically_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def __call__(self, xi):
        return field_eval(self, xi)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "components": [c.to_monomials() for c in self.components],
            "moments_used": [
                {"exponents": list(g), "value": v} for g, v in sorted(self.moments_used.items(), key=lambda kv: (sum(kv[0]), kv[0]))
            ],
            "pruned": self.pruned,
        }


def _even_multi_indices(bound: Sequence[int]):
    """Multi-indices ``γ <= bound`` with every entry even."""
    return itertools.product(*(range(0, b + 1, 2) for b in bound))


def _reduce_component(
    dq: SparsePoly, moments: MomentTable, prune: bool, rel_tol: float
) -> tuple[SparsePoly, SparsePoly, list[dict], dict]:
    d = dq.num_vars
    bound = [max((k[j] for k in dq.terms), default=0) for j in range(d)]
    terms: dict[tuple[int, ...], float] = {}
    sizes: dict[tuple[int, ...], float] = {}
    used: dict[tuple[int, ...], float] = {}
    for gamma in _even_multi_indices(bound):
        deriv = dq.diff_multi(gamma)
        if deriv.is_zero():
            continue
        try:
            m = moments.monomial_moment(gamma)
            m_abs = moments.absolute_monomial_moment(gamma)
        except (KeyError, IndexError) as exc:
            raise MomentUnavailable(f"moment {gamma} not available: {exc}") from exc
        used[gamma] = m
        fact = multi_factorial(gamma)
        for exps, c in deriv.items():
            terms[exps] = terms.get(exps, 0.0) + m * c / fact
            sizes[exps] = sizes.get(exps, 0.0) + m_abs * abs(c) / fact
    raw = SparsePoly(d, terms)
    dropped = []
    if prune:
        # a coefficient that is tiny against the cancellation-free size of its
        # contributions is a quadrature-noise copy of an exact zero (c_0 = 0)
        kept = {}
        for exps, c in terms.items():
            if abs(c) <= rel_tol * sizes[exps]:
                dropped.append({"exponents": list(exps), "value": c, "scale": sizes[exps]})
            else:
                kept[exps] = c
        out = SparsePoly(d, kept)
    else:
        out = raw
    return out, raw, dropped, used


def reduce_field(
    profile: Profile | SparsePoly,
    moments: MomentTable,
    prune: bool = True,
    rel_tol: float = _PRUNE_REL_TOL,
) -> ReducedField:
    """Reduce ``∫ e(|y|) ∇Q(y + ξ) dy`` to polynomials in ``ξ``.

    Parameters
    ----------
    profile : Profile or SparsePoly
        A bare polynomial is accepted so that non-homogeneous test profiles can
        be reduced too.
    moments : MomentTable
        Built for ``dim = d + 1``.
    prune : bool
        Drop coefficients with ``|coef| <= rel_tol * Σ |M_γ|_abs |contribution|``.

    Raises
    ------
    DimensionMismatch
        Profile and moment table disagree on ``d``.
    MomentUnavailable
        A needed moment could not be computed.
    """
    q = profile.q if isinstance(profile, Profile) else profile
    d = q.num_vars
    if moments.d != d:
        raise DimensionMismatch(f"profile has {d} variables but the moment table is for d={moments.d}")
    grads = q.grad()
    with ThreadPoolExecutor(max_workers=min(d, stage_threads())) as pool:
        results = list(pool.map(lambda dq: _reduce_component(dq, moments, prune, rel_tol), grads))
    used: dict[tuple[int, ...], float] = {}
    pruned = []
    for i, (_, _, dropped, u) in enumerate(results):
        used.update(u)
        pruned.extend({"component": i, **entry} for entry in dropped)
    return ReducedField(
        d=d,
        components=[r[0] for r in results],
        raw_components=[r[1] for r in results],
        profile=q,
        moments=moments,
        moments_used=used,
        pruned=pruned,
    )


def _as_points(field: ReducedField, xi) -> np.ndarray:
    x = np.asarray(xi, dtype=float)
    if field.d == 1 and x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1:] != (field.d,):
        raise DimensionMismatch(f"point of shape {x.shape} does not match field dimension {field.d}")
    return x


def field_eval(field: ReducedField, xi) -> np.ndarray:
    """``L(ξ)``; ``xi`` of shape ``(d,)`` or ``(..., d)``."""
    x = _as_points(field, xi)
    return np.stack([np.broadcast_to(c(x), x.shape[:-1]) for c in field.components], axis=-1)


def field_jacobian(field: ReducedField, xi) -> np.ndarray:
    """``J[i, j] = ∂L_i/∂ξ_j``; shape ``(..., d, d)``."""
    x = _as_points(field, xi)
    rows = [
        np.stack([np.broadcast_to(pij(x), x.shape[:-1]) for pij in row], axis=-1)
        for row in field.jacobian_polys
    ]
    return np.stack(rows, axis=-2)


class _TensorRule:
    """Composite Gauss-Legendre nodes on ``[-L, L]^d`` with the weight folded in."""

    def __init__(self, moments: MomentTable, panels_per_unit: float, order: int):
        gs = moments.gs
        d = moments.d
        half = gs.truncation_radius
        n_panels = max(2, int(math.ceil(2 * half * panels_per_unit)))
        edges = np.linspace(-half, half, n_panels + 1)
        t, w = np.polynomial.legendre.leggauss(order)
        mid = 0.5 * (edges[:-1] + edges[1:])
        h = 0.5 * np.diff(edges)
        nodes = (mid[:, None] + h[:, None] * t[None, :]).ravel()
        weights = (h[:, None] * w[None, :]).ravel()
        grids = np.meshgrid(*([nodes] * d), indexing="ij")
        self.points = np.stack([g.ravel() for g in grids], axis=-1)
        wgrid = np.meshgrid(*([weights] * d), indexing="ij")
        wprod = np.prod(np.stack([g.ravel() for g in wgrid], axis=-1), axis=-1)
        r = np.linalg.norm(self.points, axis=-1)
        u, du, _, _ = eval_profile(gs, r)
        p = gs.params.p
        dens = 0.5 * du * du + 0.5 * u * u - np.power(np.maximum(u, 0.0), p + 1.0) / (p + 1.0)
        self.weights = wprod * dens


def brute_force_field(
    q: Profile | SparsePoly,
    moments: MomentTable,
    xi,
    panels_per_unit: float = 1.0,
    order: int = 8,
) -> np.ndarray:
    """Direct tensor quadrature of ``∫ e(|y|) ∇Q(y + ξ) dy`` at each ``ξ``.

    Independent of the moment factorisation: it only shares the ground state.
    Intended for ``d <= 2``; the node count grows like ``(60 * order)^d``.
    """
    poly = q.q if isinstance(q, Profile) else q
    d = poly.num_vars
    if moments.d != d:
        raise DimensionMismatch(f"profile has {d} variables but the moment table is for d={moments.d}")
    rule = _TensorRule(moments, panels_per_unit, order)
    grads = poly.grad()
    xs = np.atleast_2d(np.asarray(xi, dtype=float).reshape(-1, d))
    out = np.empty_like(xs)
    for n, x in enumerate(xs):
        shifted = rule.points + x[None, :]
        for i, g in enumerate(grads):
            out[n, i] = float(rule.weights @ np.broadcast_to(g(shifted), rule.weights.shape))
    return out.reshape(np.shape(xi)) if np.ndim(xi) > 1 or np.shape(xi) == (d,) else out
