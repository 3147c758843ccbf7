"""Radial ground state of ``-ΔU + U = U^p`` in ``R^N``.

The profile is found by overshoot/undershoot shooting. A single shot from the
origin can only follow the decaying solution until the exponentially growing
mode, seeded by the last bit of the shooting parameter, takes over. The solver
therefore works in stages: once the two bracketing trajectories separate, it
restarts from the last radius where they still agree and bisects on the slope
there. Each stage buys a few more units of radius at full relative accuracy;
stages continue until ``U`` drops below the tail threshold.

Beyond the truncation radius the profile is continued analytically by the
decaying solution of the linearised equation, ``C r^{-ν} K_ν(λ r)`` with
``ν = (N - 2)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import ode, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.special import kve

from .errors import InvalidParams, NegativeRadius, NoConvergence

__all__ = [
    "ProblemParams",
    "SolverOptions",
    "GroundState",
    "ProfileValues",
    "solve_ground_state",
    "eval_profile",
    "ode_residual",
    "closed_form_1d",
]

_OVER = "over"
_UNDER = "under"
_NONE = "none"


@dataclass(frozen=True)
class ProblemParams:
    """Nonlinearity exponent ``p`` and ambient dimension ``dim`` (= N)."""

    p: float
    dim: int

    def __post_init__(self) -> None:
        if isinstance(self.dim, bool) or not isinstance(self.dim, (int, np.integer)):
            raise InvalidParams(f"dim must be an integer, got {self.dim!r}")
        if self.dim < 1:
            raise InvalidParams(f"dim must be >= 1, got {self.dim}")
        p = float(self.p)
        if not math.isfinite(p) or p <= 1.0:
            raise InvalidParams(f"p must be > 1, got {self.p!r}")
        if p >= self.critical_exponent:
            raise InvalidParams(
                f"p={p} is not subcritical for dim={self.dim} "
                f"(need p < {self.critical_exponent:g}); no ground state exists"
            )
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def critical_exponent(self) -> float:
        if self.dim <= 2:
            return math.inf
        return (self.dim + 2) / (self.dim - 2)

    @property
    def bessel_order(self) -> float:
        return 0.5 * (self.dim - 2)


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances for :func:`solve_ground_state`.

    ``shoot_tol`` is relative to the bracketed quantity (``U(0)`` in the first
    stage, the restart slope afterwards); bisection also stops once the two
    ends are adjacent doubles.
    """

    shoot_tol: float = 1e-15
    rtol: float = 1e-13
    grid_step: float = 0.005
    start_radius: float = 1e-3
    separation_tol: float = 1e-10
    tail_threshold: float = 1e-12
    residual_tol: float = 1e-8
    max_iter: int = 200
    max_stages: int = 40
    stage_horizon: float = 60.0
    fit_window: float = 5.0

    def __post_init__(self) -> None:
        for name in (
            "shoot_tol",
            "rtol",
            "grid_step",
            "start_radius",
            "separation_tol",
            "tail_threshold",
            "residual_tol",
            "stage_horizon",
            "fit_window",
        ):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParams(f"solver option {name} must be positive, got {value!r}")
        if self.start_radius >= self.grid_step:
            raise InvalidParams("start_radius must be smaller than grid_step")


class ProfileValues(NamedTuple):
    u: np.ndarray | float
    du: np.ndarray | float
    d2u: np.ndarray | float
    extrapolated: np.ndarray | bool


@dataclass(frozen=True, eq=False)
class GroundState:
    """Sampled ground state on the uniform grid ``0 = r_0 < ... < r_M = R_max``.

    Immutable after construction; :func:`eval_profile` is pure and thread-safe.
    """

    params: ProblemParams
    grid: np.ndarray
    u_values: np.ndarray
    du_values: np.ndarray
    u0: float
    decay_rate: float
    truncation_radius: float
    tail_threshold: float
    shoot_bracket: float
    n_stages: int
    _spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for arr in (self.grid, self.u_values, self.du_values):
            arr.setflags(write=False)
        spline = CubicHermiteSpline(self.grid, self.u_values, self.du_values)
        object.__setattr__(self, "_spline", spline)

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def u_tail_anchor(self) -> float:
        return float(self.u_values[-1])

    def tail_u(self, r: np.ndarray) -> np.ndarray:
        """Linearised decaying continuation, matched to ``U(R_max)``."""
        nu = self.params.bessel_order
        lam = self.decay_rate
        big_r = self.truncation_radius
        r = np.asarray(r, dtype=float)
        ratio = kve(nu, lam * r) / kve(nu, lam * big_r)
        return self.u_tail_anchor * (r / big_r) ** (-nu) * ratio * np.exp(-lam * (r - big_r))

    def tail_du(self, r: np.ndarray) -> np.ndarray:
        nu = self.params.bessel_order
        lam = self.decay_rate
        r = np.asarray(r, dtype=float)
        return -lam * self.tail_u(r) * kve(nu + 1.0, lam * r) / kve(nu, lam * r)


def _make_rhs(p: float, dim: int) -> Callable[[float, np.ndarray], list[float]]:
    friction = float(dim - 1)

    def rhs(r, y):
        u = y[0]
        nonlinear = u**p if u > 0.0 else 0.0
        return [y[1], -friction / r * y[1] + u - nonlinear]

    return rhs


def _series_start(p: float, dim: int, a: float, r: float) -> tuple[float, float]:
    # U = a + b r^2 + c r^4 + O(r^6) with b = f(a)/(2N), c = f'(a) b / (4(N+2)), f(u) = u - u^p
    b = (a - a**p) / (2.0 * dim)
    c = (1.0 - p * a ** (p - 1.0)) * b / (4.0 * (dim + 2))
    return a + b * r * r + c * r**4, 2.0 * b * r + 4.0 * c * r**3


def _classify_trial(rhs, r0: float, y0, r_end: float, rtol: float) -> str:
    """Integrate until ``U`` crosses zero (overshoot) or turns upward (undershoot)."""
    verdict = [_NONE]

    def solout(t, y):
        if y[0] < 0.0:
            verdict[0] = _OVER
            return -1
        if y[1] > 0.0:
            verdict[0] = _UNDER
            return -1
        return 0

    solver = ode(rhs).set_integrator("dop853", rtol=rtol, atol=1e-300, nsteps=10**6)
    solver.set_solout(solout)
    solver.set_initial_value(list(y0), r0)
    solver.integrate(r_end)
    return verdict[0]


def _bisect(kind_of: Callable[[float], str], under: float, over: float, opts: SolverOptions):
    """Shrink ``[under, over]`` (in either order) keeping the overshoot/undershoot split."""
    for _ in range(opts.max_iter):
        width = abs(over - under)
        if width <= opts.shoot_tol * max(abs(under), abs(over)):
            return under, over
        mid = 0.5 * (under + over)
        if mid == under or mid == over:
            return under, over
        kind = kind_of(mid)
        if kind == _OVER:
            over = mid
        elif kind == _UNDER:
            under = mid
        else:
            return mid, mid
    raise NoConvergence(
        f"shooting bracket [{under!r}, {over!r}] still open after {opts.max_iter} iterations"
    )


def _dense_trajectory(rhs, r0: float, y0, r_end: float, rtol: float):
    def crossed(t, y):
        return y[0]

    def turned(t, y):
        return y[1]

    crossed.terminal = True
    crossed.direction = -1
    turned.terminal = True
    turned.direction = 1
    return solve_ivp(
        rhs,
        (r0, r_end),
        list(y0),
        method="DOP853",
        rtol=rtol,
        atol=1e-300,
        dense_output=True,
        events=[crossed, turned],
    )


def _fit_decay_rate(grid, u, du, nu: float, window: float) -> float:
    """Median of the λ matching ``U'/U = -λ K_{ν+1}(λr)/K_ν(λr)`` over the last window."""
    mask = grid >= grid[-1] - window
    idx = np.flatnonzero(mask)
    idx = idx[:: max(1, len(idx) // 40)]
    rates = []
    for i in idx:
        r, target = grid[i], -du[i] / u[i]
        if r <= 0 or not target > 0:
            continue

        def mismatch(lam, r=r, target=target):
            return lam * kve(nu + 1.0, lam * r) / kve(nu, lam * r) - target

        try:
            rates.append(brentq(mismatch, 1e-3, 50.0, xtol=1e-15, rtol=1e-15))
        except ValueError:
            continue
    if not rates:
        raise NoConvergence("could not fit a decay rate to the profile tail")
    return float(np.median(rates))


def solve_ground_state(params: ProblemParams, opts: SolverOptions | None = None) -> GroundState:
    """Compute the positive radial ground state for ``params``.

    Raises
    ------
    InvalidParams
        Via :class:`ProblemParams` when ``p`` is not in ``(1, p_crit)``.
    NoConvergence
        When a bisection bracket cannot be established or closed, or a
        restart stage makes no progress.
    """
    opts = opts or SolverOptions()
    p, dim = params.p, params.dim
    rhs = _make_rhs(p, dim)
    h = opts.grid_step
    r_first = opts.start_radius

    # stage 1: bisect on a = U(0); a = 1 is the constant solution, an undershoot
    def kind_a(a: float) -> str:
        return _classify_trial(
            rhs, r_first, _series_start(p, dim, a, r_first), r_first + opts.stage_horizon, opts.rtol
        )

    a_over = 2.0
    for _ in range(64):
        if kind_a(a_over) == _OVER:
            break
        a_over *= 2.0
    else:
        raise NoConvergence("no overshooting value of U(0) found")
    a_under, a_over = _bisect(kind_a, 1.0, a_over, opts)
    first_bracket = abs(a_over - a_under)
    u0 = 0.5 * (a_under + a_over)

    grid_u = [u0]
    grid_du = [0.0]
    start_index = 0
    stage_r0 = r_first
    y_under = _series_start(p, dim, a_under, r_first)
    y_over = _series_start(p, dim, a_over, r_first)
    truncated = False
    n_stages = 0

    while not truncated:
        n_stages += 1
        if n_stages > opts.max_stages:
            raise NoConvergence(f"profile still above tail threshold after {opts.max_stages} stages")
        r_end = stage_r0 + opts.stage_horizon
        sol_u = _dense_trajectory(rhs, stage_r0, y_under, r_end, opts.rtol)
        sol_o = _dense_trajectory(rhs, stage_r0, y_over, r_end, opts.rtol)
        t_stop = min(sol_u.t[-1], sol_o.t[-1])
        first = start_index + 1
        last = int(math.floor(t_stop / h + 1e-9))
        if last < first:
            raise NoConvergence(f"stage {n_stages} did not advance past r={stage_r0:.3f}")
        radii = h * np.arange(first, last + 1)
        yu = sol_u.sol(radii)
        yo = sol_o.sol(radii)
        u_mid = 0.5 * (yu[0] + yo[0])
        du_mid = 0.5 * (yu[1] + yo[1])
        agree = (np.abs(yo[0] - yu[0]) <= opts.separation_tol * np.abs(u_mid)) & (u_mid > 0)
        below = u_mid < opts.tail_threshold
        n_agree = int(np.argmin(agree)) if not agree.all() else len(agree)
        hit = np.flatnonzero(below[:n_agree])
        if hit.size:
            keep = int(hit[0]) + 1
            truncated = True
        else:
            # step back from the separation point so the restart value is well inside
            keep = n_agree - 1
            if keep < 2:
                raise NoConvergence(f"restart stage {n_stages} made no progress at r={stage_r0:.3f}")
        grid_u.extend(u_mid[:keep])
        grid_du.extend(du_mid[:keep])
        start_index += keep
        if truncated:
            break

        # next stage: hold U at the restart radius fixed and bisect on the slope
        stage_r0 = start_index * h
        u_restart = grid_u[-1]
        slope = grid_du[-1]

        def kind_s(s: float, r0=stage_r0, u_r=u_restart) -> str:
            return _classify_trial(rhs, r0, (u_r, s), r0 + opts.stage_horizon, opts.rtol)

        s_over, s_under = 1.5 * slope, 0.5 * slope
        for _ in range(64):
            if kind_s(s_over) == _OVER:
                break
            s_over *= 2.0
        else:
            raise NoConvergence("no overshooting restart slope found")
        for _ in range(64):
            if kind_s(s_under) == _UNDER:
                break
            s_under *= 0.5
        else:
            raise NoConvergence("no undershooting restart slope found")
        s_under, s_over = _bisect(kind_s, s_under, s_over, opts)
        y_under = (u_restart, s_under)
        y_over = (u_restart, s_over)

    grid = h * np.arange(len(grid_u))
    u = np.asarray(grid_u, dtype=float)
    du = np.asarray(grid_du, dtype=float)
    decay = _fit_decay_rate(grid, u, du, params.bessel_order, opts.fit_window)
    return GroundState(
        params=params,
        grid=grid,
        u_values=u,
        du_values=du,
        u0=float(u0),
        decay_rate=decay,
        truncation_radius=float(grid[-1]),
        tail_threshold=opts.tail_threshold,
        shoot_bracket=first_bracket,
        n_stages=n_stages,
    )


def eval_profile(gs: GroundState, r) -> ProfileValues:
    """Evaluate ``(U, U', U'')`` at radius/radii ``r``.

    Inside ``[0, R_max]`` the values come from cubic Hermite interpolation of
    the stored samples; beyond it from the analytic tail, flagged in
    ``extrapolated``. ``U''`` is recovered from the ODE, with the limit
    ``(U(0) - U(0)^p)/N`` at the origin.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(~(r >= 0)):
        raise NegativeRadius(f"radius must be >= 0, got min {np.nanmin(r) if r.size else r}")
    p, dim = gs.params.p, gs.params.dim
    outside = r > gs.truncation_radius
    u = np.empty_like(r)
    du = np.empty_like(r)
    inside = ~outside
    if inside.any():
        u[inside] = gs._spline(r[inside])
        du[inside] = gs._spline(r[inside], 1)
    if outside.any():
        u[outside] = gs.tail_u(r[outside])
        du[outside] = gs.tail_du(r[outside])
    source = u - np.power(np.maximum(u, 0.0), p)
    d2u = np.empty_like(r)
    origin = r == 0.0
    d2u[origin] = (gs.u0 - gs.u0**p) / dim
    off = ~origin
    d2u[off] = -(dim - 1) / r[off] * du[off] + source[off]
    if scalar:
        return ProfileValues(float(u[0]), float(du[0]), float(d2u[0]), bool(outside[0]))
    return ProfileValues(u, du, d2u, outside)


def ode_residual(gs: GroundState) -> np.ndarray:
    """``-U'' - (N-1)U'/r + U - U^p`` at every grid point.

    ``U''`` is taken from an eighth-order central difference of the stored
    ``U'`` samples (odd reflection at the origin, fourth-order one-sided in
    the last few points), so the residual measures how well the samples
    satisfy the equation rather than restating it.
    """
    du = gs.du_values
    h = gs.step
    n = len(du)
    if n < 9:
        raise ValueError("grid too short for the residual stencil")
    ext = np.concatenate([-du[4:0:-1], du])  # U' is odd in r
    weights = (1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280)
    m = len(ext) - 8
    central = sum(w * ext[k : k + m] for k, w in enumerate(weights) if w) / h
    d2 = np.empty(n)
    d2[: n - 4] = central[: n - 4]
    f = du
    for j in range(n - 4, n):
        # fourth-order backward/skewed stencils on the five last samples
        k = n - 1 - j
        if k == 0:
            c = (3, -16, 36, -48, 25)
        elif k == 1:
            c = (-1, 6, -18, 10, 3)
        elif k == 2:
            c = (1, -8, 0, 8, -1)
        else:
            c = None
        if c is None:
            d2[j] = (f[j - 2] - 8 * f[j - 1] + 8 * f[j + 1] - f[j + 2]) / (12 * h)
        else:
            d2[j] = sum(ci * fi for ci, fi in zip(c, f[-5:])) / (12 * h)
    u = gs.u_values
    p, dim = gs.params.p, gs.params.dim
    source = u - np.power(np.maximum(u, 0.0), p)
    res = np.empty(n)
    res[0] = -dim * d2[0] + source[0]
    r = gs.grid[1:]
    res[1:] = -d2[1:] - (dim - 1) * du[1:] / r + source[1:]
    return res


def closed_form_1d(p: float, r) -> tuple[np.ndarray, np.ndarray]:
    """Homoclinic solution of ``-U'' + U = U^p`` on the line and its derivative."""
    r = np.asarray(r, dtype=float)
    amp = ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    k = 0.5 * (p - 1.0)
    sech = 1.0 / np.cosh(k * r)
    u = amp * sech ** (2.0 / (p - 1.0))
    du = -amp * (2.0 / (p - 1.0)) * k * np.tanh(k * r) * sech ** (2.0 / (p - 1.0))
    return u, du
