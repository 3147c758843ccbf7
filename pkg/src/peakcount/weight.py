"""Hyperplane energy density of the ground state and its moments.

The density is ``e(r) = U'(r)^2/2 + U(r)^2/2 - U(r)^{p+1}/(p+1)`` restricted to
the hyperplane ``y_N = 0`` (``d = N - 1`` variables). Its monomial moments
factor into an angular part, a closed-form integral over ``S^{d-1}``, and a
one-dimensional radial integral.
"""

from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from .errors import DimensionMismatch, QuadratureFailure
from .ground_state import GroundState, eval_profile

__all__ = [
    "RadialWeight",
    "MomentTable",
    "sphere_monomial_integral",
    "weight_eval",
    "stage_threads",
]

_GL_ORDER = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)
_REL_FLOOR = 1e-13
# profile samples are good to ~1e-11 relative; no moment can be certified tighter
_REL_TARGET = 1e-10


def stage_threads() -> int:
    """Worker cap for parallel stages, from ``PEAKCOUNT_THREADS`` (default: up to 4)."""
    raw = os.environ.get("PEAKCOUNT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def sphere_monomial_integral(beta: Sequence[int], absolute: bool = False) -> float:
    """``∫_{S^{d-1}} ω^β dσ`` (or of ``|ω^β|`` when ``absolute``).

    Equals ``2 Π Γ((β_j+1)/2) / Γ((|β|+d)/2)`` when every exponent is even, and
    zero otherwise. Evaluated in log space.
    """
    beta = tuple(int(b) for b in beta)
    if not beta:
        raise DimensionMismatch("sphere integral needs at least one variable")
    if any(b < 0 for b in beta):
        raise ValueError(f"negative exponent in {beta}")
    if not absolute and any(b % 2 for b in beta):
        return 0.0
    d = len(beta)
    log_val = math.log(2.0) + sum(gammaln((b + 1) / 2.0) for b in beta) - gammaln((sum(beta) + d) / 2.0)
    return math.exp(log_val)


def _gl(f, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * (f(x) @ _GL_WEIGHTS)


class RadialWeight:
    """Energy density ``e(r)`` of a ground state, with radial moment quadrature.

    Parameters
    ----------
    gs : GroundState
    quad_tol : float
        Absolute error target per radial moment. For moments whose magnitude
        makes this unreachable, a relative floor of ``1e-10`` of
        ``∫|integrand|`` applies instead (the profile itself is only good to
        about that).
    """

    def __init__(self, gs: GroundState, quad_tol: float = 1e-10, max_rounds: int = 30):
        if not quad_tol > 0:
            raise ValueError("quad_tol must be positive")
        self.gs = gs
        self.quad_tol = float(quad_tol)
        self.max_rounds = int(max_rounds)
        self.d = gs.params.dim - 1
        self._p = gs.params.p
        self._base: dict[str, tuple[np.ndarray, ...]] = {}
        self._lock = threading.Lock()
        self.tail_mismatch = self._measure_tail_mismatch()

    def __call__(self, r) -> np.ndarray | float:
        return weight_eval(self, r)

    def density(self, r, kind: str = "energy") -> np.ndarray:
        u, du, _, _ = eval_profile(self.gs, r)
        if kind == "energy":
            p = self._p
            return 0.5 * du * du + 0.5 * u * u - np.power(np.maximum(u, 0.0), p + 1.0) / (p + 1.0)
        if kind == "gradient":
            return du * du
        if kind == "abs_energy":
            return np.abs(self.density(r, "energy"))
        raise ValueError(f"unknown density kind {kind!r}")

    def _measure_tail_mismatch(self) -> float:
        gs = self.gs
        window = gs.grid >= gs.truncation_radius - 2.0
        r = gs.grid[window]
        model = gs.tail_u(r)
        return float(np.max(np.abs(model / gs.u_values[window] - 1.0)))

    def _base_values(self, kind: str):
        # node values on every grid cell, at the cell rule and at the two half-cell rules
        with self._lock:
            cached = self._base.get(kind)
            if cached is not None:
                return cached
        grid = self.gs.grid
        a, b = grid[:-1], grid[1:]
        m = 0.5 * (a + b)
        out = []
        for lo, hi in ((a, b), (a, m), (m, b)):
            half = 0.5 * (hi - lo)
            x = 0.5 * (lo + hi)[:, None] + half[:, None] * _GL_NODES[None, :]
            out.append((x, half, self.density(x, kind)))
        result = tuple(out)
        with self._lock:
            self._base[kind] = result
        return result

    def _tail(self, k: int, kind: str) -> tuple[float, float]:
        gs = self.gs
        p = self._p
        big_r = gs.truncation_radius

        def integrand(r):
            u = float(gs.tail_u(r))
            du = float(gs.tail_du(r))
            if kind == "gradient":
                dens = du * du
            else:
                dens = 0.5 * du * du + 0.5 * u * u - u ** (p + 1.0) / (p + 1.0)
                if kind == "abs_energy":
                    dens = abs(dens)
            return dens * r**k

        value, err = quad(integrand, big_r, np.inf, epsabs=1e-3 * self.quad_tol, epsrel=1e-12, limit=200)
        bound = err + abs(value) * 2.0 * self.tail_mismatch
        return float(value), float(bound)

    def radial_moment_with_error(self, k: int, kind: str = "energy") -> tuple[float, float]:
        """``∫_0^∞ density(r) r^k dr`` and its error bound.

        Composite 8-point Gauss-Legendre on each grid cell, checked against the
        two half-cell rules; cells that miss their share of the tolerance are
        bisected. The part beyond ``R_max`` comes from the analytic tail.
        """
        if int(k) != k or k < 0:
            raise ValueError(f"moment order must be a non-negative integer, got {k!r}")
        k = int(k)
        (xc, hc, fc), (xl, hl, fl), (xr, hr, fr) = self._base_values(kind)
        coarse = hc * ((fc * xc**k) @ _GL_WEIGHTS)
        fine = hl * ((fl * xl**k) @ _GL_WEIGHTS) + hr * ((fr * xr**k) @ _GL_WEIGHTS)
        err = np.abs(fine - coarse)
        length = self.gs.truncation_radius
        a = self.gs.grid[:-1]
        b = self.gs.grid[1:]

        total = 0.0
        total_abs = 0.0
        err_total = 0.0
        for _ in range(self.max_rounds):
            budget = np.maximum(self.quad_tol * (b - a) / length, _REL_FLOOR * np.abs(fine))
            ok = err <= budget
            total += float(fine[ok].sum())
            total_abs += float(np.abs(fine[ok]).sum())
            err_total += float(err[ok].sum())
            if ok.all():
                break
            a, b = a[~ok], b[~ok]
            m = 0.5 * (a + b)
            a, b = np.concatenate([a, m]), np.concatenate([m, b])

            def f(x, k=k):
                return self.density(x, kind) * x**k

            coarse = _gl(f, a, b)
            mid = 0.5 * (a + b)
            fine = _gl(f, a, mid) + _gl(f, mid, b)
            err = np.abs(fine - coarse)
        else:
            raise QuadratureFailure(
                f"radial moment k={k} ({kind}): {len(a)} cells above tolerance after "
                f"{self.max_rounds} refinements"
            )
        tail, tail_err = self._tail(k, kind)
        value = total + tail
        err_total += tail_err
        target = max(self.quad_tol, _REL_TARGET * (total_abs + abs(tail)))
        if not err_total <= target:
            raise QuadratureFailure(
                f"radial moment k={k} ({kind}): error estimate {err_total:.3e} exceeds {target:.3e}"
            )
        return value, err_total

    def radial_moment(self, k: int, kind: str = "energy") -> float:
        return self.radial_moment_with_error(k, kind)[0]


def weight_eval(w: RadialWeight, r):
    """``e(r) = U'^2/2 + U^2/2 - U^{p+1}/(p+1)``; scalar in, scalar out."""
    scalar = np.ndim(r) == 0
    out = w.density(np.atleast_1d(np.asarray(r, dtype=float)), "energy")
    return float(out[0]) if scalar else out


class MomentTable:
    """Cached radial and monomial moments of the energy density for one ``(p, N)``.

    Monomial moments are ``M_β = ∫_{R^d} e(|y|) y^β dy`` and the axis moments
    ``c_m = M_{m e_1}``. Entries are filled lazily (or up front by
    :meth:`precompute`) and never change afterwards.
    """

    def __init__(self, gs: GroundState, quad_tol: float = 1e-10, c_rel_tol: float = 1e-7):
        self.gs = gs
        self.weight = RadialWeight(gs, quad_tol)
        self.c_rel_tol = float(c_rel_tol)
        self._radial: dict[tuple[str, int], tuple[float, float]] = {}
        self._monomial: dict[tuple[int, ...], float] = {}
        self._lock = threading.Lock()

    @property
    def p(self) -> float:
        return self.gs.params.p

    @property
    def dim(self) -> int:
        return self.gs.params.dim

    @property
    def d(self) -> int:
        return self.dim - 1

    @property
    def quad_tol(self) -> float:
        return self.weight.quad_tol

    def key(self, beta: Sequence[int]) -> tuple[float, int, tuple[int, ...]]:
        return (self.p, self.dim, tuple(int(b) for b in beta))

    def radial(self, k: int, kind: str = "energy") -> float:
        return self.radial_with_error(k, kind)[0]

    def radial_with_error(self, k: int, kind: str = "energy") -> tuple[float, float]:
        key = (kind, int(k))
        with self._lock:
            hit = self._radial.get(key)
        if hit is not None:
            return hit
        value = self.weight.radial_moment_with_error(int(k), kind)
        with self._lock:
            self._radial.setdefault(key, value)
        return value

    def precompute(self, max_order: int, kinds: Iterable[str] = ("energy", "gradient", "abs_energy")) -> None:
        """Fill radial moments for every monomial order up to ``max_order``."""
        offset = max(self.d - 1, 0)
        jobs = [(k + offset, kind) for kind in kinds for k in range(max_order + 3)]
        jobs = [j for j in jobs if (j[1], j[0]) not in self._radial]
        self.weight._base_values("energy")
        with ThreadPoolExecutor(max_workers=stage_threads()) as pool:
            list(pool.map(lambda job: self.radial_with_error(*job), jobs))

    def monomial_moment(self, beta: Sequence[int]) -> float:
        beta = tuple(int(b) for b in beta)
        if self.d < 1:
            raise DimensionMismatch("monomial moments need dim >= 2")
        if len(beta) != self.d:
            raise DimensionMismatch(f"multi-index {beta} has {len(beta)} entries, expected {self.d}")
        if any(b % 2 for b in beta):
            return 0.0
        with self._lock:
            hit = self._monomial.get(beta)
        if hit is not None:
            return hit
        value = sphere_monomial_integral(beta) * self.radial(sum(beta) + self.d - 1)
        with self._lock:
            self._monomial.setdefault(beta, value)
        return value

    def absolute_monomial_moment(self, beta: Sequence[int]) -> float:
        """``∫ |e(|y|)| |y^β| dy``: the size a moment would have without cancellation."""
        beta = tuple(int(b) for b in beta)
        if len(beta) != self.d:
            raise DimensionMismatch(f"multi-index {beta} has {len(beta)} entries, expected {self.d}")
        return sphere_monomial_integral(beta, absolute=True) * self.radial(sum(beta) + self.d - 1, "abs_energy")

    def c_moment(self, m: int) -> float:
        if m < 0:
            raise ValueError("m must be >= 0")
        beta = [0] * self.d
        beta[0] = int(m)
        return self.monomial_moment(beta)

    def c_moment_identity(self, k: int) -> float:
        """``c_{2k}`` through the integrated-by-parts route.

        ``(2k/(2k+1)) A_{(2k+2)e_1} ∫_0^∞ U'(r)^2 r^{2k+d-1} dr``; it uses only
        ``U'^2`` and so is independent of the cancellation inside ``e``.
        """
        if k < 0:
            raise ValueError("k must be >= 0")
        if self.d < 1:
            raise DimensionMismatch("the identity route needs dim >= 2")
        if k == 0:
            return 0.0
        beta = [0] * self.d
        beta[0] = 2 * k + 2
        factor = (2 * k) / (2 * k + 1)
        return factor * sphere_monomial_integral(beta) * self.radial(2 * k + self.d - 1, "gradient")

    @property
    def c_tol(self) -> float:
        """Numerical-zero threshold for axis moments, relative to ``c_2``."""
        return self.c_rel_tol * abs(self.c_moment(2))

    def to_dict(self, max_order: int) -> dict:
        return {
            "p": self.p,
            "dim": self.dim,
            "c": {str(m): self.c_moment(m) for m in range(max_order + 1)},
            "identity_check": {str(2 * k): self.c_moment_identity(k) for k in range(max_order // 2 + 1)},
            "quad_tol": self.quad_tol,
        }
