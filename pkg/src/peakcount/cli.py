"""Command-line interface: ``peakcount <subcommand> --config run.yaml``.

Exit codes: 0 success, 1 a pipeline stage failed (or a selftest criterion
failed), 2 bad arguments or config.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .acceptance import run_all
from .classify import (
    Pipeline,
    classify_domain,
    crosscheck_1d_details,
    curvature_order,
    ground_state_summary,
    mean_curvature_eval,
)
from .config import RunConfig, Tolerances, parse_config
from .errors import ParseError, PeakCountError, StageError, ValidationError
from .ground_state import ode_residual
from .report import dumps, write_json

EXIT_OK = 0
EXIT_STAGE = 1
EXIT_USAGE = 2


def _parse_powers(text: str) -> dict[int, float]:
    """``"4:1,6:-2"`` -> ``{4: 1.0, 6: -2.0}``."""
    out = {}
    for item in text.split(","):
        deg, _, coeff = item.partition(":")
        try:
            out[int(deg)] = float(coeff) if coeff else 1.0
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad power term {item!r}; expected degree:coeff") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON run configuration")
    common.add_argument("--json", type=Path, help="write the JSON report here (default: stdout)")
    common.add_argument("--quiet", action="store_true", help="suppress the summary on stderr")
    common.add_argument("--p", type=float, help="nonlinearity exponent (overrides the config)")
    common.add_argument("--dim", type=int, help="space dimension N (overrides the config)")
    common.add_argument("--quad-tol", type=float, dest="quad_tol")
    common.add_argument("--zero-tol", type=float, dest="zero_tol", help="relative to the field scale")
    common.add_argument("--det-tol", type=float, dest="det_tol", help="relative to the Jacobian scale")
    common.add_argument("--flatness-tol", type=float, dest="flatness_tol")

    zero_flags = argparse.ArgumentParser(add_help=False)
    zero_flags.add_argument("--box", type=float, dest="box_radius", help="search box half-width")
    zero_flags.add_argument("--grid", type=int, dest="grid_per_axis", help="Newton starts per axis")

    parser = argparse.ArgumentParser(
        prog="peakcount",
        description="Count boundary single-peak solutions concentrating at a degenerate boundary point.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gs = sub.add_parser("ground-state", parents=[common], help="solve for the radial ground state")
    gs.add_argument("--csv", type=Path, help="write r, U, dU, residual samples here")

    mom = sub.add_parser("moments", parents=[common], help="axis moments c_m of the energy density")
    mom.add_argument("--max-order", type=int, default=None, help="highest m (default: profile degree, at least 6)")

    sub.add_parser("reduce", parents=[common], help="reduced vector field as polynomials")
    sub.add_parser("zeros", parents=[common, zero_flags], help="zeros of the reduced field")
    cls = sub.add_parser("classify", parents=[common, zero_flags], help="full analysis and verdict")
    cls.add_argument("--full-pipeline", action="store_true", help="run the reduction even when the shortcut applies")

    curv = sub.add_parser("curvature", parents=[common], help="curvature-order verdict for a curve (N = 2)")
    curv.add_argument("--psi", type=_parse_powers, help="curve as degree:coeff pairs, e.g. 4:1,6:-2")
    curv.add_argument("--crosscheck", action="store_true", help="also run the 1D reduction")
    curv.add_argument("--at", type=float, default=None, help="also evaluate the curvature at this t")

    sub.add_parser("selftest", help="run the acceptance criteria").add_argument("--quiet", action="store_true")
    return parser


_TOL_KEYS = ("quad_tol", "zero_tol", "det_tol", "flatness_tol", "box_radius", "grid_per_axis")


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is None:
        raise ValidationError("a profile is required: give --config")
    cfg = parse_config(args.config)
    overrides = {k: getattr(args, k, None) for k in _TOL_KEYS}
    if getattr(args, "full_pipeline", False):
        overrides["full_pipeline"] = True
    return cfg.with_overrides(p=args.p, dim=args.dim, **overrides)


def _problem_pipeline(args: argparse.Namespace) -> tuple[Pipeline, RunConfig | None]:
    """Pipeline for the profile-free subcommands; flags alone are enough."""
    if args.config is not None:
        cfg = _load_config(args)
        return Pipeline(cfg), cfg
    if args.p is None or args.dim is None:
        raise ValidationError("p and dim required (give --config or --p and --dim)")
    tol = Tolerances(**({"quad_tol": args.quad_tol} if args.quad_tol is not None else {}))
    return Pipeline.for_problem(args.p, args.dim, tol), None


def _emit(args: argparse.Namespace, payload: dict, cfg: RunConfig | None = None) -> None:
    target = args.json
    if target is None and cfg is not None and cfg.outputs.get("json"):
        target = Path(cfg.outputs["json"])
    if target is None:
        sys.stdout.write(dumps(payload))
    else:
        write_json(target, payload)


def _info(args: argparse.Namespace, text: str) -> None:
    if not getattr(args, "quiet", False):
        print(text, file=sys.stderr)


def _cmd_ground_state(args: argparse.Namespace) -> int:
    pipe, cfg = _problem_pipeline(args)
    gs = pipe.ground_state()
    csv_path = args.csv
    if csv_path is None and cfg is not None and cfg.outputs.get("csv"):
        csv_path = Path(cfg.outputs["csv"])
    if csv_path is not None:
        residual = ode_residual(gs)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "U", "dU", "residual"])
            for row in zip(gs.grid, gs.u_values, gs.du_values, residual):
                writer.writerow([format(float(v), ".16e") for v in row])
    summary = ground_state_summary(gs)
    _emit(args, {"params": summary}, cfg)
    _info(args, f"U(0) = {gs.u0:.15g}, decay rate {gs.decay_rate:.12g}, R_max = {gs.truncation_radius:g}")
    return EXIT_OK


def _cmd_moments(args: argparse.Namespace) -> int:
    pipe, cfg = _problem_pipeline(args)
    order = args.max_order if args.max_order is not None else max(pipe.max_order, 6)
    if pipe.dim < 2:
        raise ValidationError("moments need dim >= 2")
    table = pipe.moments()
    payload = {"params": pipe.partial["params"], "moments": table.to_dict(order)}
    _emit(args, payload, cfg)
    _info(args, "c_m: " + ", ".join(f"c{m}={table.c_moment(m):.6g}" for m in range(order + 1)))
    return EXIT_OK


def _cmd_reduce(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    pipe = Pipeline(cfg)
    field = pipe.field()
    payload = {
        "params": pipe.partial["params"],
        "profile": {"d": cfg.dim - 1, "monomials": pipe.polynomial.to_monomials()},
        "moments": pipe.partial["moments"],
        "field": pipe.partial["field"],
    }
    _emit(args, payload, cfg)
    for i, comp in enumerate(field.components):
        _info(args, f"L{i + 1} = {comp!r}")
    return EXIT_OK


def _cmd_zeros(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    pipe = Pipeline(cfg)
    zs = pipe.zeros()
    payload = {
        "params": pipe.partial["params"],
        "profile": {"d": cfg.dim - 1, "monomials": pipe.polynomial.to_monomials()},
        "moments": pipe.partial["moments"],
        "field": pipe.partial["field"],
        "zeros": pipe.partial["zeros"],
    }
    _emit(args, payload, cfg)
    _info(args, f"{len(zs.zeros)} zeros, {len(zs.stable)} stable, search {zs.completeness_note}")
    return EXIT_OK


def _cmd_classify(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    report = classify_domain(cfg)
    _emit(args, report.to_dict(), cfg)
    kind = "exactly" if report.exact else "at least"
    _info(args, f"predicted count: {report.predicted_count} ({kind} {report.count_lower_bound} stable zeros)")
    return EXIT_OK


def _cmd_curvature(args: argparse.Namespace) -> int:
    if args.psi is None and args.config is None:
        raise ValidationError("give --psi or a config with 'psi'")
    if args.psi is not None:
        powers = args.psi
        p = args.p
    else:
        cfg = parse_config(args.config)
        if cfg.psi is None:
            raise ValidationError("the config has no 'psi' curve")
        powers = dict(cfg.psi)
        p = args.p if args.p is not None else cfg.p
    res = curvature_order(powers)
    out: dict = {"curvature_analysis": res.to_dict()}
    if args.at is not None:
        out["curvature_at"] = {"t": args.at, "value": mean_curvature_eval(powers, args.at)}
    if args.crosscheck:
        if p is None:
            raise ValidationError("p required for --crosscheck")
        tol = Tolerances(**{k: getattr(args, k) for k in ("quad_tol", "zero_tol", "det_tol") if getattr(args, k) is not None})
        cc = crosscheck_1d_details(powers, p, tol)
        out["crosscheck"] = {
            "agrees": cc.agrees,
            "pipeline_count": cc.pipeline_count,
            "zeros": [list(z) for z in cc.zeros],
            "classifications": cc.classifications,
            "local_degrees": cc.local_degrees,
            "derivative_at_zero": cc.derivative_at_zero,
        }
    payload = {"params": {"p": p, "dim": 2}, "verdict": out}
    _emit(args, payload)
    _info(args, f"n = {res.n}, m = {res.m}: {res.verdict}")
    return EXIT_OK


def _cmd_selftest(args: argparse.Namespace) -> int:
    results = run_all(None if args.quiet else print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return EXIT_OK if not failed else EXIT_STAGE


COMMANDS = {
    "ground-state": _cmd_ground_state,
    "moments": _cmd_moments,
    "reduce": _cmd_reduce,
    "zeros": _cmd_zeros,
    "classify": _cmd_classify,
    "curvature": _cmd_curvature,
    "selftest": _cmd_selftest,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    np.seterr(all="ignore")
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.partial and getattr(args, "json", None) is not None:
            write_json(args.json, exc.partial)
        return EXIT_STAGE
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PeakCountError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
