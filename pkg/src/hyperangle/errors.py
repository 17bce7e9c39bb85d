"""Exception hierarchy shared by all hyperangle modules.

Every error carries an ``exit_code`` so the CLI can map failures onto its
stable exit-code contract (2 = usage, 3 = resource, 4 = numerical).
"""

from __future__ import annotations


class HyperangleError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(HyperangleError):
    """Invalid arguments or out-of-domain inputs supplied by the caller."""

    exit_code = 2


class InvariantViolationError(HyperangleError):
    """Data claimed to satisfy a structural invariant does not."""

    exit_code = 2


class DegenerateInputError(HyperangleError):
    """Operation undefined for this input (e.g. angle at the base point)."""

    exit_code = 2


class PreconditionError(HyperangleError):
    """A documented precondition of the operation is not met."""

    exit_code = 2


class ParseError(HyperangleError):
    """Malformed input file; message names the offending line."""

    exit_code = 2


class ResourceError(HyperangleError):
    """Work refused because it would exceed a configured memory/size cap."""

    exit_code = 3


class NumericalError(HyperangleError):
    """Quadrature or iteration failed to reach the requested tolerance.

    ``achieved`` holds the best error estimate that was attained.
    """

    exit_code = 4

    def __init__(self, message: str, achieved: float | None = None):
        if achieved is not None:
            message = f"{message} (achieved error estimate {achieved:.3e})"
        super().__init__(message)
        self.achieved = achieved


class ExhaustionError(HyperangleError):
    """An iterative search ran out of detectable structure."""

    exit_code = 4


class DiagnosticError(HyperangleError):
    """A result was produced but fails a sanity diagnostic; message explains."""

    exit_code = 4
