"""Zeros of the reduced field: Newton multistart, stability classes, completeness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatch, NotAZero
from .poly import SparsePoly, _lipschitz_on_sphere, _sphere_samples
from .reduction import ReducedField, field_eval, field_jacobian

__all__ = [
    "NONDEGENERATE_STABLE",
    "DEGENERATE_STABLE",
    "DEGENERATE_UNSTABLE",
    "INDETERMINATE",
    "STABLE_CLASSES",
    "ZeroOptions",
    "ZeroRecord",
    "ZeroSet",
    "CompletenessBound",
    "find_zeros",
    "classify_zero",
    "winding_number",
    "completeness_bound",
    "min_field_norm",
    "degree_on_box",
]

NONDEGENERATE_STABLE = "nondegenerate_stable"
DEGENERATE_STABLE = "degenerate_stable"
DEGENERATE_UNSTABLE = "degenerate_unstable"
INDETERMINATE = "indeterminate"
STABLE_CLASSES = (NONDEGENERATE_STABLE, DEGENERATE_STABLE)


@dataclass(frozen=True)
class ZeroOptions:
    """Search tolerances. ``zero_tol`` and ``det_tol`` are relative to their scales.

    ``box_radius=None`` picks ``max(5, 2 R*)`` from :func:`completeness_bound`.
    ``dedup_tol=None`` means ``1e-6 * box_radius``.
    """

    box_radius: float | None = None
    grid_per_axis: int = 32
    zero_tol: float = 1e-9
    det_tol: float = 1e-8
    dedup_tol: float | None = None
    max_iter: int = 200
    winding_samples: int = 512

    def __post_init__(self) -> None:
        for name in ("zero_tol", "det_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.box_radius is not None and not self.box_radius > 0:
            raise ValueError("box_radius must be positive")
        if self.dedup_tol is not None and not self.dedup_tol > 0:
            raise ValueError("dedup_tol must be positive")
        if self.grid_per_axis < 1:
            raise ValueError("grid_per_axis must be >= 1")


@dataclass(frozen=True)
class ZeroRecord:
    location: tuple[float, ...]
    residual: float
    jacobian: tuple[tuple[float, ...], ...]
    det: float
    classification: str
    local_degree: int | None

    @property
    def stable(self) -> bool:
        return self.classification in STABLE_CLASSES

    def to_dict(self) -> dict:
        return {
            "location": list(self.location),
            "residual": self.residual,
            "jacobian": [list(row) for row in self.jacobian],
            "det": self.det,
            "classification": self.classification,
            "local_degree": self.local_degree,
        }


@dataclass(frozen=True)
class CompletenessBound:
    """All zeros lie in ``|ξ| <= radius`` when ``certified``.

    ``mu`` is a lower bound for ``min_ω max_i |top_i(ω)|`` on the unit sphere,
    where ``top_i`` is the highest-degree part of component ``i``.
    """

    certified: bool
    radius: float
    mu: float


@dataclass(frozen=True)
class ZeroSet:
    zeros: list[ZeroRecord]
    search_box: float
    completeness_note: str
    completeness: CompletenessBound
    identically_zero: bool = False
    dedup_tol: float = 0.0
    zero_tol: float = 0.0
    starts: int = 0
    discarded: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def stable(self) -> list[ZeroRecord]:
        return [z for z in self.zeros if z.stable]

    @property
    def complete(self) -> bool:
        return self.completeness_note == "complete"

    def to_dict(self) -> dict:
        return {
            "search_box": self.search_box,
            "completeness_note": self.completeness_note,
            "completeness_radius": self.completeness.radius,
            "identically_zero": self.identically_zero,
            "dedup_tol": self.dedup_tol,
            "zero_tol": self.zero_tol,
            "zeros": [z.to_dict() for z in self.zeros],
            "stable_count": len(self.stable),
        }


def _check_dim(field_: ReducedField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (field_.d,):
        raise DimensionMismatch(f"point {x} does not match field dimension {field_.d}")
    return x


def _jacobian_scale(field_: ReducedField, jac: np.ndarray) -> float:
    coeff = max((p.max_abs_coeff() for row in field_.jacobian_polys for p in row), default=0.0)
    return (float(np.linalg.norm(jac)) + coeff) ** field_.d


def winding_number(field_: ReducedField, center, radius: float, samples: int = 512) -> int:
    """Winding number of ``L`` (``d = 2``) around the circle ``|ξ - center| = radius``."""
    if field_.d != 2:
        raise DimensionMismatch("winding numbers are defined here for d = 2 only")
    c = _check_dim(field_, center)
    theta = 2.0 * np.pi * np.arange(samples + 1) / samples
    pts = c[None, :] + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    vals = field_eval(field_, pts)
    angle = np.unwrap(np.arctan2(vals[:, 1], vals[:, 0]))
    return int(round((angle[-1] - angle[0]) / (2.0 * np.pi)))


def _winding_on_square(field_: ReducedField, half: float, samples_per_side: int = 4096) -> int:
    t = np.linspace(-half, half, samples_per_side, endpoint=False)
    sides = [
        np.stack([t, np.full_like(t, -half)], axis=1),
        np.stack([np.full_like(t, half), t], axis=1),
        np.stack([-t, np.full_like(t, half)], axis=1),
        np.stack([np.full_like(t, -half), -t], axis=1),
    ]
    pts = np.concatenate(sides + [sides[0][:1]])
    vals = field_eval(field_, pts)
    angle = np.unwrap(np.arctan2(vals[:, 1], vals[:, 0]))
    return int(round((angle[-1] - angle[0]) / (2.0 * np.pi)))


def classify_zero(
    field_: ReducedField,
    xi0,
    zero_tol: float | None = None,
    det_tol: float = 1e-8,
    probe_radius: float = 1e-5,
    winding_samples: int = 512,
) -> ZeroRecord:
    """Stability class of a zero.

    Nondegenerate Jacobian gives a stable zero. Otherwise the local degree
    decides: the sign change for ``d = 1`` (no change means an unstable zero),
    the winding number for ``d = 2`` (zero winding is indeterminate), and no
    verdict for ``d >= 3``.

    Raises
    ------
    NotAZero
        ``|L(xi0)| > zero_tol``; the default is ``1e-9`` times the field scale.
    """
    x = _check_dim(field_, xi0)
    if zero_tol is None:
        zero_tol = 1e-9 * max(field_.scale, np.finfo(float).tiny)
    value = field_eval(field_, x)
    residual = float(np.linalg.norm(value))
    if not residual <= zero_tol:
        raise NotAZero(f"|L({x.tolist()})| = {residual:.3e} exceeds zero_tol {zero_tol:.3e}")
    jac = field_jacobian(field_, x)
    det = float(np.linalg.det(jac))
    scale = _jacobian_scale(field_, jac)
    if abs(det) > det_tol * scale:
        cls, degree = NONDEGENERATE_STABLE, int(np.sign(det))
    elif field_.d == 1:
        lo = float(field_eval(field_, x - probe_radius)[0])
        hi = float(field_eval(field_, x + probe_radius)[0])
        degree = int((np.sign(hi) - np.sign(lo)) // 2)
        cls = DEGENERATE_STABLE if degree else DEGENERATE_UNSTABLE
    elif field_.d == 2:
        degree = winding_number(field_, x, probe_radius, winding_samples)
        cls = DEGENERATE_STABLE if degree else INDETERMINATE
    else:
        cls, degree = INDETERMINATE, None
    return ZeroRecord(
        location=tuple(float(v) for v in x),
        residual=residual,
        jacobian=tuple(tuple(float(v) for v in row) for row in jac),
        det=det,
        classification=cls,
        local_degree=degree,
    )


def _top_parts(field_: ReducedField) -> list[tuple[int, SparsePoly, list[float]]]:
    out = []
    for comp in field_.components:
        deg = comp.degree
        lower = [0.0] * max(deg, 0)
        for exps, c in comp.items():
            k = sum(exps)
            if k < deg:
                lower[k] += abs(c)
        out.append((deg, comp.homogeneous_part(deg), lower))
    return out


def completeness_bound(field_: ReducedField, samples: int = 4096) -> CompletenessBound:
    """Radius outside which ``L`` cannot vanish, when the top parts allow one.

    With ``μ <= min_ω max_i |top_i(ω)|`` and ``B_ik`` the coefficient mass of
    degree ``k < D_i`` in component ``i``, any zero satisfies ``μ R^{D_i} <=
    Σ_k B_ik R^k`` for some ``i``; the largest positive root bounds ``R``.
    """
    parts = [t for t in _top_parts(field_) if t[0] >= 0]
    if not parts:
        return CompletenessBound(False, math.inf, 0.0)
    d = field_.d
    tops = [t[1] for t in parts]
    if d == 1:
        pts = np.array([[1.0], [-1.0]])
        mu = float(np.max(np.abs(np.stack([np.broadcast_to(t(pts), (2,)) for t in tops])), axis=0).min())
    else:
        n = samples if d == 2 else max(samples, 20000)
        pts = _sphere_samples(d, n)
        vals = np.max(np.abs(np.stack([np.broadcast_to(t(pts), (n,)) for t in tops])), axis=0)
        spacing = 2.0 * np.pi / n if d == 2 else 4.0 * np.sqrt(4 * np.pi / n)
        if d > 3:
            spacing = math.inf
        lip = max(_lipschitz_on_sphere([t]) for t in tops)
        mu = float(vals.min()) - lip * spacing / 2.0
    if not mu > 0:
        return CompletenessBound(False, math.inf, max(mu, 0.0))
    radius = 0.0
    for deg, _, lower in parts:
        if deg == 0 or not any(lower):
            continue
        # μ R^D - Σ B_k R^k is negative below its single positive root (Descartes)
        coeffs = [mu] + [-lower[k] for k in range(deg - 1, -1, -1)]
        roots = np.roots(coeffs)
        real = [r.real for r in roots if abs(r.imag) <= 1e-9 * max(1.0, abs(r)) and r.real > 0]
        radius = max(radius, max(real, default=0.0) * (1 + 1e-9))
    return CompletenessBound(True, float(radius), mu)


def _newton(field_: ReducedField, starts: np.ndarray, max_iter: int, cap: float) -> np.ndarray:
    x = starts.copy()
    active = np.ones(len(x), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        xa = x[active]
        f = field_eval(field_, xa)
        jac = field_jacobian(field_, xa)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(jac, rcond=1e-14), f)
        norm = np.linalg.norm(step, axis=1)
        too_long = norm > cap
        step[too_long] *= (cap / norm[too_long])[:, None]
        xa = xa - step
        x[active] = xa
        done = norm <= 1e-15 * (1.0 + np.linalg.norm(xa, axis=1))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return x


def _grid_starts(d: int, box: float, n: int) -> np.ndarray:
    axis = np.linspace(-box, box, n) if n > 1 else np.zeros(1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _default_box(bound: CompletenessBound) -> float:
    if bound.certified:
        return max(5.0, 2.0 * bound.radius)
    return 5.0


def find_zeros(field_: ReducedField, opts: ZeroOptions | None = None) -> ZeroSet:
    """Newton from every node of a ``grid_per_axis^d`` grid on ``[-box, box]^d``.

    Converged points with ``|L| <= zero_tol`` are deduplicated (closest
    residual wins) and classified. The completeness note is ``complete`` when
    :func:`completeness_bound` certifies a radius inside the box.
    """
    opts = opts or ZeroOptions()
    d = field_.d
    if d > 3:
        raise DimensionMismatch(f"zero search supports d <= 3, got d={d}")
    bound = completeness_bound(field_)
    box = float(opts.box_radius) if opts.box_radius is not None else _default_box(bound)
    dedup = opts.dedup_tol if opts.dedup_tol is not None else 1e-6 * box
    scale = field_.scale
    zero_tol = opts.zero_tol * scale

    if field_.is_identically_zero():
        return ZeroSet([], box, "non_isolated", bound, True, dedup, zero_tol)

    starts = _grid_starts(d, box, opts.grid_per_axis)
    ends = _newton(field_, starts, opts.max_iter, cap=box)
    finite = np.all(np.isfinite(ends), axis=1)
    inside = finite & np.all(np.abs(ends) <= box * (1 + 1e-12), axis=1)
    cand = ends[inside]
    resid = np.linalg.norm(field_eval(field_, cand), axis=1) if len(cand) else np.zeros(0)
    ok = resid <= zero_tol
    cand, resid = cand[ok], resid[ok]

    kept: list[np.ndarray] = []
    for i in np.argsort(resid, kind="stable"):
        if all(np.linalg.norm(cand[i] - k) > dedup for k in kept):
            kept.append(cand[i])
    kept.sort(key=lambda v: tuple(v))
    probe = 10.0 * dedup
    records = [
        classify_zero(field_, z, zero_tol, opts.det_tol, probe, opts.winding_samples) for z in kept
    ]

    if bound.certified and bound.radius <= box:
        note = "complete"
    else:
        note = "heuristic"
    return ZeroSet(
        records,
        box,
        note,
        bound,
        False,
        dedup,
        zero_tol,
        starts=len(starts),
        discarded=int(len(starts) - len(cand)),
    )


def degree_on_box(field_: ReducedField, box: float) -> int:
    """Winding number of ``L`` along the boundary of ``[-box, box]^2``."""
    if field_.d != 2:
        raise DimensionMismatch("box degree is computed for d = 2 only")
    return _winding_on_square(field_, box)


def min_field_norm(field_: ReducedField, box: float, grid_per_axis: int = 64, refine: int = 8) -> tuple[float, tuple[float, ...]]:
    """Minimum of ``|L|`` over ``[-box, box]^d``: grid sample, then local polish."""
    d = field_.d
    pts = _grid_starts(d, box, grid_per_axis)
    vals = np.linalg.norm(field_eval(field_, pts), axis=1)
    best = float(vals.min())
    best_pt = pts[int(np.argmin(vals))]
    bounds = [(-box, box)] * d
    for i in np.argsort(vals)[:refine]:
        res = minimize(
            lambda x: float(np.linalg.norm(field_eval(field_, x))),
            pts[i],
            method="L-BFGS-B",
            bounds=bounds,
        )
        if res.fun < best:
            best, best_pt = float(res.fun), res.x
    return best, tuple(float(v) for v in best_pt)

