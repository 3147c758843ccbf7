"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class PeakCountError(Exception):
    """Base class for all errors raised by :mod:`peakcount`."""


class InvalidParams(PeakCountError, ValueError):
    """Exponent or dimension outside the range where a ground state exists."""


class NoConvergence(PeakCountError, RuntimeError):
    """The shooting bisection did not close its bracket."""


class NegativeRadius(PeakCountError, ValueError):
    pass


class QuadratureFailure(PeakCountError, RuntimeError):
    """Adaptive quadrature could not meet its error target."""


class DimensionMismatch(PeakCountError, ValueError):
    pass


class NotHomogeneous(PeakCountError, ValueError):
    pass


class DegreeTooLow(PeakCountError, ValueError):
    pass


class MomentUnavailable(PeakCountError, KeyError):
    pass


class NotAZero(PeakCountError, ValueError):
    pass


class DegeneratePsi(PeakCountError, ValueError):
    pass


class ParseError(PeakCountError, ValueError):
    """Config file could not be read; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ValidationError(PeakCountError, ValueError):
    pass


class StageError(PeakCountError):
    """Wraps an upstream failure with the name of the pipeline stage that raised it.

    ``partial`` carries whatever artifacts the completed stages produced so the
    caller can still write them out.
    """

    def __init__(self, stage: str, cause: BaseException, partial: dict | None = None):
        self.stage = stage
        self.cause = cause
        self.partial = partial if partial is not None else {}
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
