"""
@description
Exception hierarchy for the kicked-top simulator. Every error carries the
process exit code the CLI reports for it.

Key features:
- KickedTopError base with `exit_code`
- ConfigError (2), NumericalIntegrityError (4), shape / Hermiticity errors
- SweepPointError wrapping a failure with its parameter point

@notes
- "No recurrence found" is a valid negative result, not an exception;
  the recurrence command maps it to EXIT_NO_RECURRENCE.
"""

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_NO_RECURRENCE = 3
EXIT_NUMERICAL = 4


class KickedTopError(Exception):
    """Base class; `exit_code` is what the CLI returns when this escapes a command."""

    exit_code = EXIT_NUMERICAL


class ConfigError(KickedTopError, ValueError):
    """Invalid physical parameter, grid size, epsilon ladder or config file."""

    exit_code = EXIT_CONFIG


class DimensionMismatchError(KickedTopError, ValueError):
    """A state or operator does not match the Hilbert-space dimension."""


class NonHermitianError(KickedTopError, ValueError):
    """A generator handed to the exponential is not Hermitian."""


class NumericalIntegrityError(KickedTopError, ArithmeticError):
    """Positivity, norm or step-size guard violated during propagation."""


class FitError(KickedTopError, ValueError):
    """Too few usable points, or non-positive values, for a log-log fit."""


class SweepPointError(KickedTopError):
    """A single sweep point failed; keeps the point so the report can name it."""

    def __init__(self, point: Dict[str, Any], cause: Exception):
        self.point = dict(point)
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", EXIT_INTERNAL)
        super().__init__(f"sweep point {self.point} failed: {cause}")


def exit_code_for(exc: Optional[BaseException]) -> int:
    """Exit code for an exception escaping a command (0 for None)."""
    if exc is None:
        return EXIT_OK
    return getattr(exc, "exit_code", EXIT_INTERNAL)