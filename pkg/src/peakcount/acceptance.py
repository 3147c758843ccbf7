"""Acceptance criteria as plain functions, shared by ``peakcount selftest`` and the test suite.

Each criterion returns a :class:`CriterionResult`; sub-checks that fail are
listed in ``detail`` so a red line says exactly what missed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classify import classify_domain, crosscheck_1d_details
from .config import config_from_mapping
from .ground_state import GroundState, ProblemParams, closed_form_1d, solve_ground_state
from .poly import SparsePoly, check_flatness_condition, validate_profile
from .reduction import brute_force_field, field_eval, field_jacobian, reduce_field
from .weight import MomentTable
from .zeros import NONDEGENERATE_STABLE, DEGENERATE_STABLE, find_zeros, min_field_norm

__all__ = ["CriterionResult", "AcceptanceContext", "CRITERIA", "run_all", "format_line"]

EXAMPLE_Q = SparsePoly(2, {(5, 0): 1.0, (1, 4): -1.0})
HARMONIC_Q = SparsePoly(2, {(4, 0): 1.0, (2, 2): -6.0, (0, 4): 1.0})
ODD_Q = SparsePoly(2, {(3, 0): 2.0, (0, 4): 1.0})
SELFTEST_BUDGET = 120.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass
class AcceptanceContext:
    """Caches ground states and moment tables across criteria."""

    started: float = field(default_factory=time.perf_counter)
    _gs: dict = field(default_factory=dict)
    _tables: dict = field(default_factory=dict)

    def ground_state(self, p: float, dim: int) -> GroundState:
        key = (float(p), int(dim))
        if key not in self._gs:
            self._gs[key] = solve_ground_state(ProblemParams(p, dim))
        return self._gs[key]

    def table(self, p: float, dim: int) -> MomentTable:
        key = (float(p), int(dim))
        if key not in self._tables:
            self._tables[key] = MomentTable(self.ground_state(p, dim))
        return self._tables[key]


class _Checks:
    def __init__(self) -> None:
        self.parts: list[str] = []
        self.failed: list[str] = []

    def add(self, ok: bool, text: str) -> None:
        self.parts.append(text)
        if not ok:
            self.failed.append(text)

    def result(self, number: int, title: str) -> CriterionResult:
        if self.failed:
            detail = "failed: " + "; ".join(self.failed)
        else:
            detail = "; ".join(self.parts)
        return CriterionResult(number, title, not self.failed, detail)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a)


def criterion_1(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    for p in (2.0, 3.0, 5.0):
        t0 = time.perf_counter()
        gs = solve_ground_state(ProblemParams(p, 1))
        elapsed = time.perf_counter() - t0
        exact, _ = closed_form_1d(p, gs.grid)
        err = float(np.max(np.abs(gs.u_values - exact)))
        checks.add(err <= 1e-7, f"p={p:g}: sup err {err:.1e} (<= 1e-7)")
        checks.add(elapsed < 1.0, f"p={p:g}: {elapsed:.2f} s (< 1 s)")
    return checks.result(1, "1D ground-state oracle")


def criterion_2(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    t0 = time.perf_counter()
    worst = 0.0
    for dim, p in ((2, 3.0), (3, 2.0), (3, 3.0)):
        tab = ctx.table(p, dim)
        c = [tab.c_moment(m) for m in range(7)]
        for m in (0, 1, 3, 5):
            ratio = abs(c[m]) / c[2]
            worst = max(worst, ratio)
            checks.add(ratio <= 1e-7, f"(N={dim},p={p:g}) |c{m}|/c2={ratio:.1e}")
        for m in (2, 4, 6):
            checks.add(c[m] > 0, f"(N={dim},p={p:g}) c{m}={c[m]:.4g} > 0")
    elapsed = time.perf_counter() - t0
    checks.add(elapsed < 10.0, f"{elapsed:.1f} s (< 10 s)")
    checks.parts = [f"max |c_odd,c0|/c2 = {worst:.1e}", "c2,c4,c6 > 0", f"{elapsed:.1f} s"]
    return checks.result(2, "Moment sign laws")


def criterion_3(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    worst = 0.0
    for dim, p in ((3, 2.0), (2, 3.0)):
        tab = ctx.table(p, dim)
        for k in (1, 2, 3):
            rel = _rel(tab.c_moment_identity(k), tab.c_moment(2 * k))
            worst = max(worst, rel)
            checks.add(rel <= 1e-6, f"(N={dim},p={p:g}) k={k}: rel {rel:.1e}")
    checks.parts = [f"max relative difference {worst:.1e} (<= 1e-6)"]
    return checks.result(3, "Cross-route c_2k identity")


def criterion_4(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    tab = ctx.table(2.0, 3)
    f = reduce_field(validate_profile(EXAMPLE_Q), tab)
    c2, c4 = tab.c_moment(2), tab.c_moment(4)
    expected = [
        {(0, 0): 4 * c4, (2, 0): 30 * c2, (0, 2): -6 * c2},
        {(1, 1): -12 * c2},
    ]
    worst = 0.0
    for i, want in enumerate(expected):
        got = f.components[i].terms
        checks.add(set(got) == set(want), f"L{i + 1} monomials {sorted(got)} vs {sorted(want)}")
        for key, value in want.items():
            if key in got:
                rel = _rel(got[key], value)
                worst = max(worst, rel)
                checks.add(rel <= 1e-5, f"L{i + 1}{list(key)} rel {rel:.1e}")
    checks.parts = ["4 monomials", f"max coefficient rel err {worst:.1e} (<= 1e-5)"]
    return checks.result(4, "Example field reproduction")


def criterion_5(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    tab = ctx.table(2.0, 3)
    f = reduce_field(validate_profile(EXAMPLE_Q), tab)
    c2, c4 = tab.c_moment(2), tab.c_moment(4)
    star = math.sqrt(2 * c4 / (3 * c2))
    det_want = -96 * c2 * c4
    zs = find_zeros(f)
    checks.add(len(zs.zeros) == 2, f"{len(zs.zeros)} zeros")
    for z in zs.zeros:
        x1, x2 = z.location
        rel = _rel(abs(x2), star)
        checks.add(rel <= 1e-6 and abs(x1) <= 1e-6 * star, f"zero {z.location} vs (0, ±{star:.6f}) rel {rel:.1e}")
        checks.add(z.classification == NONDEGENERATE_STABLE, f"classification {z.classification}")
        drel = _rel(z.det, det_want)
        checks.add(drel <= 1e-5, f"det {z.det:.6g} vs {det_want:.6g} rel {drel:.1e}")
    signs = sorted(np.sign(z.location[1]) for z in zs.zeros)
    checks.add(signs == [-1.0, 1.0], "zeros on both sides")
    report = classify_domain(
        config_from_mapping({"p": 2, "dim": 3, "profile": EXAMPLE_Q.to_monomials()})
    )
    checks.add(report.exact and report.predicted_count == 2, f"verdict {report.predicted_count} exact={report.exact}")
    checks.parts = [f"2 nondegenerate zeros at (0, ±{star:.10f})", f"det {det_want:.6g}", "verdict exactly 2"]
    return checks.result(5, "Stable zero set of the example")


def criterion_6(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    tab = ctx.table(2.0, 3)
    f = reduce_field(validate_profile(EXAMPLE_Q), tab)
    xs = np.random.default_rng(20240601).uniform(-2.0, 2.0, size=(20, 2))
    direct = brute_force_field(EXAMPLE_Q, tab, xs)
    poly = field_eval(f, xs)
    rel = np.linalg.norm(direct - poly, axis=1) / np.linalg.norm(poly, axis=1)
    worst = float(rel.max())
    checks.add(worst <= 1e-5, f"max rel {worst:.1e} (<= 1e-5) over 20 points")
    return checks.result(6, "Brute-force field oracle")


def criterion_7(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    report = classify_domain(config_from_mapping({"p": 2, "dim": 3, "profile": ODD_Q.to_monomials()}))
    checks.add(
        report.predicted_count == 0 and report.exact and report.shortcut == "proposition_odd_monomial",
        f"shortcut count {report.predicted_count}",
    )
    tab = ctx.table(2.0, 3)
    f = reduce_field(ODD_Q, tab)
    zs = find_zeros(f)
    low, _ = min_field_norm(f, zs.search_box)
    c2 = tab.c_moment(2)
    checks.add(len(zs.zeros) == 0, f"pipeline zeros {len(zs.zeros)}")
    checks.add(low >= 2.9 * c2, f"min |L| = {low / c2:.4f} c2 (>= 2.9 c2)")
    return checks.result(7, "Odd-monomial non-existence")


def criterion_8(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    tab = ctx.table(3.0, 2)
    want = {4: 1, 5: 0, 6: 1}
    for n, count in want.items():
        report = classify_domain(config_from_mapping({"p": 3, "psi": {"powers": {n: 1}}}))
        ok = report.exact and report.predicted_count == count
        checks.add(ok, f"t^{n}: verdict {report.predicted_count} (want {count})")
        cross = crosscheck_1d_details({n: 1.0}, 3.0, moments=tab)
        checks.add(cross.agrees, f"t^{n}: pipeline {cross.pipeline_count} vs curvature {cross.curvature.count}")
        if n == 6:
            cls = cross.classifications[0] if cross.classifications else None
            deg = cross.local_degrees[0] if cross.local_degrees else None
            checks.add(
                cls == DEGENERATE_STABLE and deg == 1,
                f"t^6: zero is {cls} with degree {deg} and L'(0)={cross.derivative_at_zero:.6g} (want degenerate_stable, degree 1)",
            )
    return checks.result(8, "Curvature theorem (N=2)")


def criterion_9(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    fr = check_flatness_condition(validate_profile(EXAMPLE_Q))
    checks.add(fr.holds, f"example holds={fr.holds}")
    checks.add(abs(fr.min_grad_laplacian_norm - 12.0) <= 1e-6 * 12.0, f"example min norm {fr.min_grad_laplacian_norm:.10f} (want 12) at {tuple(round(v, 6) for v in fr.argmin)}")
    hr = check_flatness_condition(validate_profile(HARMONIC_Q))
    checks.add(not hr.holds and hr.min_grad_laplacian_norm == 0.0, f"harmonic holds={hr.holds}, min {hr.min_grad_laplacian_norm:g}")
    return checks.result(9, "Flatness condition")


def _rotation(theta: float) -> np.ndarray:
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def criterion_10(ctx: AcceptanceContext) -> CriterionResult:
    checks = _Checks()
    tab = ctx.table(2.0, 3)
    rng = np.random.default_rng(7)
    profiles = [EXAMPLE_Q, HARMONIC_Q, SparsePoly(2, {(4, 0): 1.0, (0, 4): 1.0}), SparsePoly(2, {(3, 3): 1.0, (1, 5): -2.0, (6, 0): 0.5})]
    sym = fd = rot = lin = 0.0
    for q in profiles:
        f = reduce_field(q, tab, prune=False)
        scale = max(f.scale, 1.0)
        xs = rng.uniform(-3, 3, size=(20, 2))
        jac = field_jacobian(f, xs)
        sym = max(sym, float(np.max(np.abs(jac - np.swapaxes(jac, -1, -2)))) / scale)
        h = 1e-5
        for x, j in zip(xs[:5], jac[:5]):
            num = np.stack([(field_eval(f, x + h * e) - field_eval(f, x - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
            fd = max(fd, float(np.max(np.abs(num - j)) / max(np.max(np.abs(j)), 1.0)))
        r = _rotation(rng.uniform(0, 2 * math.pi))
        fr = reduce_field(q.linear_substitution(r), tab, prune=False)
        for x in xs[:5]:
            lhs = field_eval(fr, x)
            rhs = r.T @ field_eval(f, r @ x)
            rot = max(rot, float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1.0)))
    q1, q2 = profiles[0], profiles[3]
    a, b = 1.7, -0.6
    f1, f2 = reduce_field(q1, tab, prune=False), reduce_field(q2, tab, prune=False)
    fc = reduce_field(q1 * a + q2 * b, tab, prune=False)
    for i in range(2):
        combo = f1.components[i] * a + f2.components[i] * b
        keys = set(combo.terms) | set(fc.components[i].terms)
        for k in keys:
            want = combo.terms.get(k, 0.0)
            lin = max(lin, abs(fc.components[i].terms.get(k, 0.0) - want) / max(abs(want), 1.0))
    checks.add(sym <= 1e-10, f"Jacobian symmetry {sym:.1e} (<= 1e-10 scale)")
    checks.add(rot <= 1e-8, f"rotation equivariance {rot:.1e} (<= 1e-8)")
    checks.add(lin <= 1e-12, f"linearity {lin:.1e} (<= 1e-12)")
    checks.add(fd <= 1e-6, f"Jacobian vs finite differences {fd:.1e} (<= 1e-6)")
    total = time.perf_counter() - ctx.started
    checks.add(total < SELFTEST_BUDGET, f"suite {total:.1f} s (< {SELFTEST_BUDGET:.0f} s)")
    return checks.result(10, "Property suites and runtime")


CRITERIA: list[Callable[[AcceptanceContext], CriterionResult]] = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
]


def run_one(fn: Callable[[AcceptanceContext], CriterionResult], ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = fn(ctx)
    except Exception as exc:  # a crash is a failed criterion, not a crashed suite
        number = CRITERIA.index(fn) + 1
        res = CriterionResult(number, fn.__name__, False, f"error: {type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


def format_line(res: CriterionResult) -> str:
    status = "PASS" if res.passed else "FAIL"
    return f"{status} [{res.number:>2}] {res.title}: {res.detail} ({res.seconds:.2f} s)"


def run_all(emit: Callable[[str], None] | None = None) -> list[CriterionResult]:
    ctx = AcceptanceContext()
    out = []
    for fn in CRITERIA:
        res = run_one(fn, ctx)
        out.append(res)
        if emit is not None:
            emit(format_line(res))
    return out
