"""Run configuration: a YAML (or JSON) file, optionally overridden by flags."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ParseError, ValidationError
from .poly import SparsePoly

__all__ = ["Tolerances", "RunConfig", "parse_config", "config_from_mapping"]

_TOLERANCE_KEYS = ("quad_tol", "zero_tol", "det_tol", "flatness_tol", "box_radius", "grid_per_axis")


@dataclass(frozen=True)
class Tolerances:
    """Numerical knobs. ``zero_tol``, ``det_tol`` and ``flatness_tol`` are
    relative to the scale of the quantity they threshold."""

    quad_tol: float = 1e-10
    zero_tol: float = 1e-9
    det_tol: float = 1e-8
    flatness_tol: float = 1e-8
    box_radius: float | None = None
    grid_per_axis: int = 32

    def __post_init__(self) -> None:
        for name in _TOLERANCE_KEYS:
            value = getattr(self, name)
            if value is None:
                continue
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"tolerance {name} must be strictly positive, got {value!r}")
        if int(self.grid_per_axis) != self.grid_per_axis:
            raise ValidationError("grid_per_axis must be an integer")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in _TOLERANCE_KEYS}


@dataclass(frozen=True)
class RunConfig:
    """One analysis run.

    Exactly one of ``profile`` (monomial list in ``dim - 1`` variables) and
    ``psi`` (``{degree: coeff}`` curve for ``dim = 2``) is set.
    """

    p: float
    dim: int
    profile: tuple[tuple[tuple[int, ...], float], ...] | None = None
    psi: tuple[tuple[int, float], ...] | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    outputs: Mapping[str, str] = field(default_factory=dict)
    full_pipeline: bool = False

    def __post_init__(self) -> None:
        if (self.profile is None) == (self.psi is None):
            raise ValidationError("exactly one of 'profile' and 'psi' must be given")
        if self.psi is not None and self.dim != 2:
            raise ValidationError(f"'psi' describes a curve and needs dim = 2, got dim = {self.dim}")
        if self.profile is not None:
            for exps, _ in self.profile:
                if len(exps) != self.dim - 1:
                    raise ValidationError(
                        f"monomial exponents {list(exps)} need {self.dim - 1} entries for dim = {self.dim}"
                    )

    @property
    def polynomial(self) -> SparsePoly:
        """The profile (or ``ψ``) as a :class:`SparsePoly`."""
        if self.profile is not None:
            return SparsePoly(self.dim - 1, {e: c for e, c in self.profile})
        return SparsePoly.from_powers(dict(self.psi))

    def with_overrides(self, **changes: Any) -> RunConfig:
        """Copy with top-level fields or tolerances replaced; ``None`` values are ignored."""
        top = {k: v for k, v in changes.items() if v is not None and k not in _TOLERANCE_KEYS}
        tol = {k: v for k, v in changes.items() if v is not None and k in _TOLERANCE_KEYS}
        out = replace(self, **top) if top else self
        if tol:
            out = replace(out, tolerances=replace(out.tolerances, **tol))
        return out


def _key_lines(text: str) -> dict[str, int]:
    """1-based line of each top-level and ``tolerances.*`` key."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    out: dict[str, int] = {}
    if isinstance(root, yaml.MappingNode):
        for key, value in root.value:
            out[str(key.value)] = key.start_mark.line + 1
            if isinstance(value, yaml.MappingNode):
                for sub, _ in value.value:
                    out[f"{key.value}.{sub.value}"] = sub.start_mark.line + 1
    return out


def _number(data: Mapping, name: str, lines: Mapping[str, int], kind=float, label: str | None = None):
    value = data[name]
    label = label or name
    if isinstance(value, str):
        # YAML 1.1 reads exponent literals without a dot (1e-9) as strings
        try:
            value = float(value)
        except ValueError:
            raise ParseError(f"expected a number, got {value!r}", lines.get(label), label) from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", lines.get(label), label)
    if kind is int:
        if int(value) != value:
            raise ParseError(f"expected an integer, got {value!r}", lines.get(label), label)
        return int(value)
    return float(value)


def _parse_profile(raw, lines) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise ParseError("expected a non-empty list of monomials", lines.get("profile"), "profile")
    out = []
    for i, mono in enumerate(raw):
        where = f"profile[{i}]"
        if not isinstance(mono, Mapping) or "exponents" not in mono or "coeff" not in mono:
            raise ParseError("each monomial needs 'exponents' and 'coeff'", lines.get("profile"), where)
        exps = mono["exponents"]
        if not isinstance(exps, list) or not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in exps):
            raise ParseError(f"exponents must be non-negative integers, got {exps!r}", lines.get("profile"), where)
        coeff = mono["coeff"]
        if isinstance(coeff, str):
            try:
                coeff = float(coeff)
            except ValueError:
                raise ParseError(f"coefficient {coeff!r} is not a number", lines.get("profile"), where) from None
        if isinstance(coeff, bool) or not isinstance(coeff, (int, float)):
            raise ParseError(f"coefficient {coeff!r} is not a number", lines.get("profile"), where)
        out.append((tuple(exps), float(coeff)))
    return tuple(out)


def _parse_psi(raw, lines) -> tuple:
    powers = raw.get("powers") if isinstance(raw, Mapping) else None
    if not isinstance(powers, Mapping) or not powers:
        raise ParseError("expected {'powers': {degree: coeff}}", lines.get("psi"), "psi")
    out = []
    for deg, coeff in powers.items():
        try:
            k = int(deg)
            if str(k) != str(deg).strip() or k < 0:
                raise ValueError
            c = float(coeff)
        except (TypeError, ValueError):
            raise ParseError(f"bad power entry {deg!r}: {coeff!r}", lines.get("psi"), "psi.powers") from None
        out.append((k, c))
    return tuple(sorted(out))


def config_from_mapping(data: Mapping, lines: Mapping[str, int] | None = None) -> RunConfig:
    """Validate an already-loaded mapping (see :func:`parse_config`)."""
    lines = lines or {}
    if not isinstance(data, Mapping):
        raise ParseError("top level must be a mapping")
    known = {"p", "dim", "profile", "psi", "tolerances", "outputs", "full_pipeline"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ParseError(f"unknown key {unknown[0]!r}", lines.get(unknown[0]), unknown[0])
    if "p" not in data:
        raise ValidationError("p required")
    p = _number(data, "p", lines)
    if "psi" in data and "dim" not in data:
        dim = 2
    elif "dim" not in data:
        raise ValidationError("dim required")
    else:
        dim = _number(data, "dim", lines, int)
    profile = _parse_profile(data["profile"], lines) if "profile" in data else None
    psi = _parse_psi(data["psi"], lines) if "psi" in data else None

    tol_raw = data.get("tolerances") or {}
    if not isinstance(tol_raw, Mapping):
        raise ParseError("expected a mapping", lines.get("tolerances"), "tolerances")
    tol = {}
    for key in tol_raw:
        if key not in _TOLERANCE_KEYS:
            raise ParseError(f"unknown tolerance {key!r}", lines.get(f"tolerances.{key}"), f"tolerances.{key}")
        kind = int if key == "grid_per_axis" else float
        tol[key] = _number(tol_raw, key, lines, kind, f"tolerances.{key}")

    outputs = data.get("outputs") or {}
    if not isinstance(outputs, Mapping) or not all(isinstance(v, str) for v in outputs.values()):
        raise ParseError("outputs must map names to paths", lines.get("outputs"), "outputs")
    full = data.get("full_pipeline", False)
    if not isinstance(full, bool):
        raise ParseError("expected true or false", lines.get("full_pipeline"), "full_pipeline")
    return RunConfig(p, dim, profile, psi, Tolerances(**tol), dict(outputs), full)


def parse_config(path: str | Path) -> RunConfig:
    """Read and validate a config file.

    Raises
    ------
    ParseError
        Unreadable file, malformed YAML, or a field of the wrong type; carries
        the 1-based line when known.
    ValidationError
        Well-formed input that breaks a :class:`RunConfig` invariant.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ParseError(f"malformed config: {exc.problem}", line) from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed config: {exc}") from exc
    if data is None:
        raise ParseError("config file is empty")
    return config_from_mapping(data, _key_lines(text))
