"""Counting verdicts: the staged pipeline, the odd-monomial shortcut and the N = 2 curvature route."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .config import RunConfig, Tolerances
from .errors import DegeneratePsi, PeakCountError, StageError, ValidationError
from .ground_state import GroundState, ProblemParams, solve_ground_state
from .poly import (
    FlatnessResult,
    OddMonomialForm,
    Profile,
    SparsePoly,
    check_flatness_condition,
    detect_odd_monomial_form,
    validate_profile,
)
from .reduction import ReducedField, reduce_field
from .weight import MomentTable
from .zeros import (
    INDETERMINATE,
    NONDEGENERATE_STABLE,
    ZeroOptions,
    ZeroSet,
    find_zeros,
    min_field_norm,
)

__all__ = [
    "SHORTCUT_ODD_MONOMIAL",
    "Pipeline",
    "ClassificationReport",
    "CurvatureResult",
    "CrosscheckResult",
    "classify_domain",
    "curvature_order",
    "mean_curvature_eval",
    "crosscheck_1d",
    "crosscheck_1d_details",
    "ground_state_summary",
]

SHORTCUT_ODD_MONOMIAL = "proposition_odd_monomial"


def ground_state_summary(gs: GroundState) -> dict:
    return {
        "p": gs.params.p,
        "dim": gs.params.dim,
        "u0": gs.u0,
        "decay_rate": gs.decay_rate,
        "truncation_radius": gs.truncation_radius,
        "grid_step": gs.step,
        "stages": gs.n_stages,
    }


class Pipeline:
    """Lazily evaluated stages for one config; every failure names its stage.

    Each accessor computes its stage once. On failure a :class:`StageError` is
    raised whose ``partial`` holds the JSON pieces of the stages that finished.
    """

    def __init__(self, config: RunConfig | None, polynomial: SparsePoly | None = None, *, p=None, dim=None, tolerances=None):
        self.config = config
        self.p = config.p if config is not None else float(p)
        self.dim = config.dim if config is not None else int(dim)
        self.tol: Tolerances = config.tolerances if config is not None else (tolerances or Tolerances())
        if polynomial is None and config is not None:
            polynomial = config.polynomial
        self.polynomial = polynomial
        self._cache: dict[str, Any] = {}
        self.partial: dict[str, Any] = {"params": {"p": self.p, "dim": self.dim}}

    @classmethod
    def for_problem(cls, p: float, dim: int, tolerances: Tolerances | None = None) -> Pipeline:
        """Pipeline without a profile: only the ground state and moments are usable."""
        return cls(None, None, p=p, dim=dim, tolerances=tolerances)

    def _stage(self, name: str, fn: Callable[[], Any]) -> Any:
        if name in self._cache:
            return self._cache[name]
        try:
            value = fn()
        except StageError:
            raise
        except (PeakCountError, ArithmeticError, ValueError) as exc:
            raise StageError(name, exc, dict(self.partial)) from exc
        self._cache[name] = value
        return value

    @property
    def max_order(self) -> int:
        return max(self.polynomial.degree, 2) if self.polynomial is not None else 6

    def params(self) -> ProblemParams:
        return self._stage("params", lambda: ProblemParams(self.p, self.dim))

    def ground_state(self) -> GroundState:
        params = self.params()

        def run():
            gs = solve_ground_state(params)
            self.partial["params"] = ground_state_summary(gs)
            return gs

        return self._stage("ground_state", run)

    def moments(self) -> MomentTable:
        gs = self.ground_state()

        def run():
            table = MomentTable(gs, quad_tol=self.tol.quad_tol)
            table.precompute(self.max_order, ("energy", "abs_energy"))
            self.partial["moments"] = table.to_dict(self.max_order)
            return table

        return self._stage("moments", run)

    def field(self) -> ReducedField:
        table = self.moments()

        def run():
            f = reduce_field(self.polynomial, table)
            self.partial["field"] = f.to_dict()
            return f

        return self._stage("reduce_field", run)

    def zero_options(self) -> ZeroOptions:
        return ZeroOptions(
            box_radius=self.tol.box_radius,
            grid_per_axis=int(self.tol.grid_per_axis),
            zero_tol=self.tol.zero_tol,
            det_tol=self.tol.det_tol,
        )

    def zeros(self) -> ZeroSet:
        f = self.field()

        def run():
            zs = find_zeros(f, self.zero_options())
            self.partial["zeros"] = zs.to_dict()
            return zs

        return self._stage("find_zeros", run)


@dataclass(frozen=True)
class CurvatureResult:
    n: int
    m: int
    verdict: str
    count: int | None

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "verdict": self.verdict, "count": self.count}


def _as_curve(psi) -> SparsePoly:
    if isinstance(psi, SparsePoly):
        if psi.num_vars != 1:
            raise ValidationError("a curve needs exactly one variable")
        return psi
    if isinstance(psi, Mapping):
        return SparsePoly.from_powers(psi)
    return SparsePoly.from_powers(dict(psi))


def curvature_order(psi) -> CurvatureResult:
    """Order ``m = n - 2`` of the first nonzero derivative of the curvature at 0.

    ``n`` is the lowest degree present in ``ψ``. Odd ``m`` gives no solution,
    even ``m >= 2`` exactly one; ``m = 0`` lies outside the theorem.

    Raises
    ------
    DegeneratePsi
        ``ψ ≡ 0``.
    ValidationError
        ``ψ(0) ≠ 0`` or ``ψ'(0) ≠ 0``.
    """
    curve = _as_curve(psi)
    if curve.is_zero():
        raise DegeneratePsi("psi is identically zero")
    n = curve.min_degree
    if n < 2:
        raise ValidationError("psi must vanish to second order at 0 (psi(0) = psi'(0) = 0)")
    m = n - 2
    if m == 0:
        return CurvatureResult(n, m, "outside_theorem_scope", None)
    if m % 2:
        return CurvatureResult(n, m, "no_solution", 0)
    return CurvatureResult(n, m, "exactly_one", 1)


def mean_curvature_eval(psi, t: float) -> float:
    """``ψ''(t) / (1 + ψ'(t)^2)^{3/2}``."""
    curve = _as_curve(psi)
    x = np.array([float(t)])
    d1 = float(curve.diff(0)(x))
    d2 = float(curve.diff(0, 2)(x))
    return d2 / (1.0 + d1 * d1) ** 1.5


@dataclass(frozen=True)
class CrosscheckResult:
    agrees: bool
    curvature: CurvatureResult
    pipeline_count: int
    zeros: list[tuple[float, ...]]
    classifications: list[str]
    local_degrees: list[int | None]
    derivative_at_zero: float | None
    field: ReducedField = field(repr=False, compare=False)

    def __bool__(self) -> bool:
        return self.agrees


def _leading_term(curve: SparsePoly) -> SparsePoly:
    return curve.homogeneous_part(curve.min_degree)


def crosscheck_1d_details(psi, p: float, tolerances: Tolerances | None = None, moments: MomentTable | None = None) -> CrosscheckResult:
    """Reduce the leading term of ``ψ`` (``d = 1``) and compare with :func:`curvature_order`.

    For even ``m`` agreement also requires the stable set to be ``{0}`` with
    ``L'(0) ≠ 0``.
    """
    curve = _as_curve(psi)
    curv = curvature_order(curve)
    q = _leading_term(curve)
    if moments is None:
        cfg = RunConfig(p, 2, psi=tuple(sorted((k[0], c) for k, c in q.items())), tolerances=tolerances or Tolerances())
        pipe = Pipeline(cfg, q)
        f, zs = pipe.field(), pipe.zeros()
    else:
        f = reduce_field(q, moments)
        tol = tolerances or Tolerances()
        zs = find_zeros(f, ZeroOptions(tol.box_radius, int(tol.grid_per_axis), tol.zero_tol, tol.det_tol))
    stable = zs.stable
    deriv = float(f.jacobian_polys[0][0](np.zeros(1))) if not f.is_identically_zero() else 0.0
    count = len(stable)
    agrees = zs.complete and curv.count is not None and count == curv.count
    if agrees and curv.count == 1:
        at_origin = abs(stable[0].location[0]) <= zs.dedup_tol
        agrees = at_origin and deriv != 0.0
    return CrosscheckResult(
        agrees=bool(agrees),
        curvature=curv,
        pipeline_count=count,
        zeros=[z.location for z in zs.zeros],
        classifications=[z.classification for z in zs.zeros],
        local_degrees=[z.local_degree for z in zs.zeros],
        derivative_at_zero=deriv,
        field=f,
    )


def crosscheck_1d(psi, p: float = 2.0, tolerances: Tolerances | None = None, moments: MomentTable | None = None) -> bool:
    """Whether the moment reduction and the curvature order give the same count."""
    return crosscheck_1d_details(psi, p, tolerances, moments).agrees


@dataclass
class ClassificationReport:
    """Final verdict plus the artifacts that produced it.

    ``predicted_count`` is an ``int`` when ``exact`` and the string ``">= n"``
    otherwise (``None`` when the curvature theorem does not apply).
    """

    params: dict
    profile: dict
    xi_set: list[tuple[float, ...]]
    count_lower_bound: int
    exact: bool
    predicted_count: int | str | None
    conditions: dict
    curvature_analysis: dict | None = None
    shortcut: str | None = None
    notes: list[str] = field(default_factory=list)
    moments: dict | None = None
    field: dict | None = None
    zeros: dict | None = None

    def to_dict(self) -> dict:
        verdict = {
            "predicted_count": self.predicted_count,
            "exact": self.exact,
            "count_lower_bound": self.count_lower_bound,
            "xi_set": [list(x) for x in self.xi_set],
            "shortcut": self.shortcut,
            "curvature_analysis": self.curvature_analysis,
            "notes": list(self.notes),
        }
        return {
            "params": self.params,
            "profile": self.profile,
            "moments": self.moments,
            "field": self.field,
            "zeros": self.zeros,
            "conditions": self.conditions,
            "verdict": verdict,
        }


def _profile_summary(poly: SparsePoly, config: RunConfig, alpha: int | None) -> dict:
    out: dict[str, Any] = {"d": poly.num_vars, "monomials": poly.to_monomials(), "alpha": alpha}
    if config.psi is not None:
        out["psi"] = {str(k): c for k, c in config.psi}
    return out


def _flatness_dict(fr: FlatnessResult | None) -> dict | None:
    if fr is None:
        return None
    return {
        "holds": fr.holds,
        "min_grad_laplacian_norm": fr.min_grad_laplacian_norm,
        "argmin": list(fr.argmin),
        "lower_bound": fr.lower_bound,
        "tolerance": fr.tolerance,
        "certified": fr.certified,
    }


def classify_domain(config: RunConfig) -> ClassificationReport:
    """Run the whole analysis for one config.

    Profile mode: the odd-monomial shortcut is tried on the raw polynomial
    first; otherwise validate, solve, reduce, find zeros, and check the
    flatness and nondegeneracy conditions. Curve mode (``psi``, ``dim = 2``)
    adds the curvature-order verdict and runs the same pipeline on the
    leading term of ``ψ``.

    Raises
    ------
    StageError
        Any upstream failure, naming the stage and carrying partial output.
    """
    curvature = None
    notes: list[str] = []
    poly = config.polynomial
    if config.psi is not None:
        try:
            curvature = curvature_order(poly)
        except PeakCountError as exc:
            raise StageError("curvature_order", exc, {"params": {"p": config.p, "dim": config.dim}}) from exc
        poly = _leading_term(poly)
        if curvature.count is None:
            notes.append("curvature does not vanish at the point (m = 0): outside the theorem's hypothesis")
            return ClassificationReport(
                params={"p": config.p, "dim": config.dim},
                profile=_profile_summary(poly, config, poly.degree - 1),
                xi_set=[],
                count_lower_bound=0,
                exact=False,
                predicted_count=None,
                conditions={"curvature_in_scope": False},
                curvature_analysis=curvature.to_dict(),
                notes=notes,
            )

    pipe = Pipeline(config, poly)
    pipe.params()
    odd: OddMonomialForm = detect_odd_monomial_form(poly)
    shortcut = odd.applies and bool(odd.odd_axes)

    if shortcut:
        notes.append(f"odd exponent on axes {odd.odd_axes}: no boundary single peak solution")
        conditions: dict[str, Any] = {
            "flatness_holds": None,
            "all_nondegenerate": True,
            "odd_monomial_shortcut": True,
            "indeterminate_zeros_present": False,
        }
        report = ClassificationReport(
            params=pipe.partial["params"],
            profile=_profile_summary(poly, config, None),
            xi_set=[],
            count_lower_bound=0,
            exact=True,
            predicted_count=0,
            conditions=conditions,
            curvature_analysis=curvature.to_dict() if curvature else None,
            shortcut=SHORTCUT_ODD_MONOMIAL,
            notes=notes,
        )
        if config.full_pipeline:
            zs = pipe.zeros()
            f = pipe.field()
            low, _ = min_field_norm(f, zs.search_box)
            conditions["pipeline_stable_zeros"] = len(zs.stable)
            conditions["pipeline_min_field_norm"] = low
            conditions["pipeline_agrees"] = len(zs.zeros) == 0 and low > 0
            report.params = pipe.partial["params"]
            report.moments = pipe.partial.get("moments")
            report.field = pipe.partial.get("field")
            report.zeros = pipe.partial.get("zeros")
        return report

    profile: Profile = pipe._stage("validate_profile", lambda: validate_profile(poly))
    flat = pipe._stage(
        "flatness", lambda: check_flatness_condition(profile, rel_tol=config.tolerances.flatness_tol)
    )
    zs = pipe.zeros()
    f = pipe.field()

    stable = zs.stable
    all_nondeg = all(z.classification == NONDEGENERATE_STABLE for z in zs.zeros)
    indeterminate = any(z.classification == INDETERMINATE for z in zs.zeros)
    finite = not zs.identically_zero
    conditions = {
        "flatness_holds": flat.holds,
        "flatness": _flatness_dict(flat),
        "all_nondegenerate": all_nondeg,
        "odd_monomial_shortcut": False,
        "indeterminate_zeros_present": indeterminate,
        "zero_set_finite": finite,
        "search_complete": zs.complete,
    }
    if not finite:
        notes.append("the reduced field vanishes identically: zeros are not isolated, finiteness hypothesis violated")
    if finite and not zs.complete:
        notes.append("zero search could not be certified complete; count is a lower bound")
    if not flat.holds:
        notes.append("flatness condition fails; count is a lower bound")

    exact = bool(flat.holds and all_nondeg and not indeterminate and finite and zs.complete)
    n = len(stable)
    if exact and not (conditions["flatness_holds"] and conditions["all_nondegenerate"]):
        raise AssertionError("report invariant violated: exact without flatness and nondegeneracy")

    if curvature is not None:
        agree = exact and n == curvature.count
        conditions["curvature_agrees"] = agree
        if not agree:
            notes.append(f"curvature order predicts {curvature.count}, reduction gives {n}")

    return ClassificationReport(
        params=pipe.partial["params"],
        profile=_profile_summary(poly, config, profile.alpha),
        xi_set=[z.location for z in stable],
        count_lower_bound=n,
        exact=exact,
        predicted_count=n if exact else f">= {n}",
        conditions=conditions,
        curvature_analysis=curvature.to_dict() if curvature else None,
        notes=notes,
        moments=pipe.partial.get("moments"),
        field=pipe.partial.get("field"),
        zeros=pipe.partial.get("zeros"),
    )

