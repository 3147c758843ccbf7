"""Sparse multivariate polynomials and checks on the boundary profile ``Q``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import DegreeTooLow, DimensionMismatch, NotHomogeneous, ValidationError

__all__ = [
    "SparsePoly",
    "Profile",
    "FlatnessResult",
    "OddMonomialForm",
    "poly_eval",
    "poly_grad",
    "poly_laplacian",
    "validate_profile",
    "check_flatness_condition",
    "detect_odd_monomial_form",
]

Exponent = tuple[int, ...]


class SparsePoly:
    """Polynomial in ``num_vars`` real variables stored as ``{exponents: coeff}``.

    Canonical: exact zero coefficients are never stored. Instances are treated
    as immutable; every operation returns a new polynomial.
    """

    __slots__ = ("num_vars", "_terms")

    def __init__(self, num_vars: int, terms: Mapping[Sequence[int], float] | None = None):
        if num_vars < 1:
            raise DimensionMismatch("a polynomial needs at least one variable")
        self.num_vars = int(num_vars)
        clean: dict[Exponent, float] = {}
        for exps, coeff in (terms or {}).items():
            key = tuple(int(e) for e in exps)
            if len(key) != self.num_vars:
                raise DimensionMismatch(f"exponent {key} does not have {self.num_vars} entries")
            if any(e < 0 for e in key):
                raise ValueError(f"negative exponent in {key}")
            value = clean.get(key, 0.0) + float(coeff)
            clean[key] = value
        self._terms = {k: v for k, v in clean.items() if v != 0.0}

    # construction ---------------------------------------------------------

    @classmethod
    def constant(cls, num_vars: int, value: float) -> SparsePoly:
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, index: int, num_vars: int) -> SparsePoly:
        exps = [0] * num_vars
        exps[index] = 1
        return cls(num_vars, {tuple(exps): 1.0})

    @classmethod
    def from_monomials(cls, monomials: Iterable[Mapping], num_vars: int | None = None) -> SparsePoly:
        """Build from ``[{"exponents": [...], "coeff": c}, ...]``."""
        monomials = list(monomials)
        if num_vars is None:
            if not monomials:
                raise ValidationError("cannot infer the number of variables from an empty monomial list")
            num_vars = len(monomials[0]["exponents"])
        terms: dict[Exponent, float] = {}
        for mono in monomials:
            key = tuple(int(e) for e in mono["exponents"])
            terms[key] = terms.get(key, 0.0) + float(mono["coeff"])
        return cls(num_vars, terms)

    @classmethod
    def from_powers(cls, powers: Mapping) -> SparsePoly:
        """Univariate polynomial from ``{degree: coeff}``."""
        return cls(1, {(int(k),): float(v) for k, v in powers.items()})

    def to_monomials(self) -> list[dict]:
        return [{"exponents": list(k), "coeff": v} for k, v in self.items()]

    # inspection -----------------------------------------------------------

    @property
    def terms(self) -> dict[Exponent, float]:
        return dict(self._terms)

    def items(self) -> list[tuple[Exponent, float]]:
        """Terms in a fixed order: by total degree, then lexicographic exponents."""
        return sorted(self._terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self._terms), default=-1)

    @property
    def min_degree(self) -> int:
        return min((sum(k) for k in self._terms), default=-1)

    def degrees(self) -> set[int]:
        return {sum(k) for k in self._terms}

    def max_abs_coeff(self) -> float:
        return max((abs(v) for v in self._terms.values()), default=0.0)

    def homogeneous_part(self, degree: int) -> SparsePoly:
        return SparsePoly(self.num_vars, {k: v for k, v in self._terms.items() if sum(k) == degree})

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.num_vars == other.num_vars and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.num_vars, frozenset(self._terms.items())))

    def __repr__(self) -> str:
        if not self._terms:
            return "SparsePoly(0)"
        parts = []
        for exps, c in self.items():
            mono = "*".join(
                f"y{j + 1}" + (f"^{e}" if e > 1 else "") for j, e in enumerate(exps) if e
            )
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return "SparsePoly(" + " ".join(parts) + ")"

    # arithmetic -----------------------------------------------------------

    def _check(self, other: SparsePoly) -> None:
        if other.num_vars != self.num_vars:
            raise DimensionMismatch(f"{self.num_vars} vs {other.num_vars} variables")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = SparsePoly.constant(self.num_vars, other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        self._check(other)
        terms = dict(self._terms)
        for k, v in other._terms.items():
            terms[k] = terms.get(k, 0.0) + v
        return SparsePoly(self.num_vars, terms)

    __radd__ = __add__

    def __neg__(self) -> SparsePoly:
        return SparsePoly(self.num_vars, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return SparsePoly(self.num_vars, {k: v * float(other) for k, v in self._terms.items()})
        if not isinstance(other, SparsePoly):
            return NotImplemented
        self._check(other)
        terms: dict[Exponent, float] = {}
        for k1, v1 in self._terms.items():
            for k2, v2 in other._terms.items():
                key = tuple(a + b for a, b in zip(k1, k2))
                terms[key] = terms.get(key, 0.0) + v1 * v2
        return SparsePoly(self.num_vars, terms)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> SparsePoly:
        if n < 0:
            raise ValueError("negative power")
        out = SparsePoly.constant(self.num_vars, 1.0)
        for _ in range(n):
            out = out * self
        return out

    # calculus -------------------------------------------------------------

    def diff(self, j: int, order: int = 1) -> SparsePoly:
        if not 0 <= j < self.num_vars:
            raise DimensionMismatch(f"variable index {j} out of range for {self.num_vars} variables")
        terms: dict[Exponent, float] = {}
        for exps, c in self._terms.items():
            e = exps[j]
            if e < order:
                continue
            falling = math.prod(range(e - order + 1, e + 1))
            key = exps[:j] + (e - order,) + exps[j + 1 :]
            terms[key] = terms.get(key, 0.0) + c * falling
        return SparsePoly(self.num_vars, terms)

    def diff_multi(self, gamma: Sequence[int]) -> SparsePoly:
        out = self
        for j, g in enumerate(gamma):
            if g:
                out = out.diff(j, g)
        return out

    def grad(self) -> list[SparsePoly]:
        return [self.diff(j) for j in range(self.num_vars)]

    def laplacian(self) -> SparsePoly:
        out = SparsePoly(self.num_vars)
        for j in range(self.num_vars):
            out = out + self.diff(j, 2)
        return out

    def linear_substitution(self, matrix) -> SparsePoly:
        """``x ↦ P(M x)``: replace ``y_j`` by ``Σ_k M[j, k] y_k``."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (self.num_vars, self.num_vars):
            raise DimensionMismatch(f"substitution matrix must be {self.num_vars}x{self.num_vars}")
        images = [
            SparsePoly(self.num_vars, {tuple(int(i == k) for i in range(self.num_vars)): m[j, k] for k in range(self.num_vars)})
            for j in range(self.num_vars)
        ]
        out = SparsePoly(self.num_vars)
        for exps, c in self._terms.items():
            term = SparsePoly.constant(self.num_vars, c)
            for j, e in enumerate(exps):
                if e:
                    term = term * images[j] ** e
            out = out + term
        return out

    # evaluation -----------------------------------------------------------

    def __call__(self, x) -> np.ndarray | float:
        """Evaluate at one point (shape ``(d,)``) or many (shape ``(..., d)``)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.num_vars,):
            raise DimensionMismatch(f"point has shape {x.shape}, expected trailing dimension {self.num_vars}")
        out = np.zeros(x.shape[:-1])
        for exps, c in self._terms.items():
            mono = np.full(x.shape[:-1], c)
            for j, e in enumerate(exps):
                if e:
                    mono = mono * x[..., j] ** e
            out = out + mono
        return float(out) if out.ndim == 0 else out


def poly_eval(p: SparsePoly, x):
    return p(x)


def poly_grad(p: SparsePoly, x=None):
    """Gradient polynomials, or their values at ``x`` when a point is given."""
    g = p.grad()
    if x is None:
        return g
    return np.stack([np.asarray(gi(x)) for gi in g], axis=-1)


def poly_laplacian(p: SparsePoly, x=None):
    lap = p.laplacian()
    return lap if x is None else lap(x)


@dataclass(frozen=True)
class Profile:
    """Homogeneous boundary profile: every monomial of ``q`` has degree ``alpha + 1``."""

    q: SparsePoly
    alpha: int

    @property
    def d(self) -> int:
        return self.q.num_vars


def validate_profile(q: SparsePoly, min_alpha: int = 3, seed: int = 0) -> Profile:
    """Check homogeneity and flatness order of ``q`` and wrap it as a :class:`Profile`.

    Raises
    ------
    NotHomogeneous
        Monomials of different total degree (or the zero polynomial).
    DegreeTooLow
        Degree ``alpha + 1`` with ``alpha < min_alpha``.
    """
    if q.is_zero():
        raise NotHomogeneous("the profile is identically zero")
    degrees = q.degrees()
    if len(degrees) != 1:
        raise NotHomogeneous(f"monomials have mixed total degrees {sorted(degrees)}")
    alpha = degrees.pop() - 1
    if alpha < min_alpha:
        raise DegreeTooLow(f"degree {alpha + 1} gives alpha={alpha} < {min_alpha}")
    # guards against representation bugs rather than the degree bookkeeping above
    rng = np.random.default_rng(seed)
    for _ in range(8):
        x = rng.normal(size=q.num_vars)
        t = rng.uniform(0.3, 3.0)
        lhs, rhs = q(t * x), t ** (alpha + 1) * q(x)
        if abs(lhs - rhs) > 1e-12 * max(abs(lhs), abs(rhs), 1e-300) and abs(lhs - rhs) > 1e-300:
            raise NotHomogeneous(f"Q(t x) != t^{alpha + 1} Q(x) at t={t:.3f}")
    return Profile(q, alpha)


@dataclass(frozen=True)
class FlatnessResult:
    holds: bool
    min_grad_laplacian_norm: float
    argmin: tuple[float, ...]
    lower_bound: float
    tolerance: float
    certified: bool


def _sphere_samples(d: int, n: int) -> np.ndarray:
    if d == 2:
        theta = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if d == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        phi = np.pi * (1.0 + 5**0.5) * i
        rho = np.sqrt(1.0 - z * z)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    pts = np.random.default_rng(0).normal(size=(n, d))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _lipschitz_on_sphere(polys: Sequence[SparsePoly]) -> float:
    # |d/ds ω^γ| <= |γ| along unit-speed curves on the sphere, so each component
    # is Lipschitz with constant Σ |c| |γ|
    per = [sum(abs(c) * sum(k) for k, c in p.items()) for p in polys]
    return float(np.sqrt(sum(v * v for v in per)))


def check_flatness_condition(
    profile: Profile | SparsePoly,
    samples: int = 4096,
    refine: int = 8,
    rel_tol: float = 1e-8,
) -> FlatnessResult:
    """Verify ``∇ΔQ ≠ 0`` on the unit sphere of ``R^d``.

    Samples ``|∇ΔQ|`` on the sphere, refines around the smallest samples, and
    reports the refined minimum. The verdict uses a Lipschitz lower bound over
    the sample spacing (exact on the two-point sphere for ``d = 1``; for
    ``d >= 4`` the random sampling gives no certificate).
    """
    q = profile.q if isinstance(profile, Profile) else profile
    d = q.num_vars
    field = q.laplacian().grad()
    scale = max((g.max_abs_coeff() for g in field), default=0.0)
    tol = rel_tol * scale

    def norm(x):
        return np.sqrt(sum(np.asarray(g(x)) ** 2 for g in field))

    if d == 1:
        pts = np.array([[1.0], [-1.0]])
        vals = norm(pts)
        i = int(np.argmin(vals))
        best = float(vals[i])
        return FlatnessResult(best > tol, best, (float(pts[i, 0]),), best, tol, True)

    if scale == 0.0:
        x0 = np.zeros(d)
        x0[0] = 1.0
        return FlatnessResult(False, 0.0, tuple(x0), 0.0, tol, True)

    n = samples if d == 2 else max(samples, 20000)
    pts = _sphere_samples(d, n)
    vals = norm(pts)
    order = np.argsort(vals)[:refine]
    best_val = float(vals[order[0]])
    best_pt = pts[order[0]]

    if d == 2:
        step = 2.0 * np.pi / n
        for idx in order:
            theta0 = 2.0 * np.pi * idx / n

            def f(t):
                return float(norm(np.array([np.cos(t), np.sin(t)])))

            res = minimize_scalar(f, bounds=(theta0 - step, theta0 + step), method="bounded", options={"xatol": 1e-12})
            if res.fun < best_val:
                best_val = float(res.fun)
                best_pt = np.array([np.cos(res.x), np.sin(res.x)])
        lower = float(vals.min()) - _lipschitz_on_sphere(field) * step / 2.0
        certified = True
    else:
        for idx in order:

            def f(x):
                return float(norm(x / np.linalg.norm(x)))

            res = minimize(f, pts[idx], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
            if res.fun < best_val:
                best_val = float(res.fun)
                best_pt = res.x / np.linalg.norm(res.x)
        if d == 3:
            # covering radius of the Fibonacci lattice is below 2 sqrt(4π/n) for n this large
            lower = float(vals.min()) - _lipschitz_on_sphere(field) * 2.0 * np.sqrt(4 * np.pi / n)
            certified = True
        else:
            lower = best_val
            certified = False
    lower = max(lower, 0.0)
    holds = lower > tol if certified else best_val > tol
    if not holds and best_val > tol and certified:
        # sampling too coarse to certify; fall back on the refined minimum
        holds = best_val > tol
        certified = False
    return FlatnessResult(bool(holds), best_val, tuple(float(v) for v in best_pt), lower, tol, certified)


@dataclass(frozen=True)
class OddMonomialForm:
    applies: bool
    odd_axes: list[int]
    exponents: dict[int, int]


def detect_odd_monomial_form(profile: Profile | SparsePoly, min_exponent: int = 3) -> OddMonomialForm:
    """Recognise ``Q = Σ_j a_j y_j^{α_j}`` with every ``a_j ≠ 0`` and ``α_j >= 3``.

    ``applies`` is true only for that exact shape (one pure power per axis,
    every axis present); ``odd_axes`` lists the 1-based axes with odd
    ``α_j``. When it applies with an odd axis there are no zeros of the
    reduced field at all.
    """
    q = profile.q if isinstance(profile, Profile) else profile
    d = q.num_vars
    exps: dict[int, int] = {}
    for key, _ in q.items():
        nonzero = [j for j, e in enumerate(key) if e]
        if len(nonzero) != 1:
            return OddMonomialForm(False, [], {})
        j = nonzero[0]
        if j in exps or key[j] < min_exponent:
            return OddMonomialForm(False, [], {})
        exps[j] = key[j]
    if len(exps) != d:
        return OddMonomialForm(False, [], {})
    odd = [j + 1 for j in sorted(exps) if exps[j] % 2]
    return OddMonomialForm(True, odd, {j + 1: e for j, e in sorted(exps.items())})
