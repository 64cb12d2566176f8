"""Exception types raised by the bellgames library."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from src.corrbox import ValidationReport


class BellGamesError(ValueError):
    """Base class for all library errors."""


class MalformedInputError(BellGamesError):
    """Raised for non-finite, mis-shaped or unparsable numeric input."""


class SignalingBoxError(BellGamesError):
    """Raised when a party's marginal depends on the other party's setting."""


class InfeasibleParametersError(BellGamesError):
    """Raised when generator parameters cannot produce a valid box."""


class MalformedStateError(BellGamesError):
    """Raised for quantum states or measurement directions that are not physical."""


class SolverFailureError(BellGamesError):
    """Raised when the feasibility solver cannot reach a verdict."""


class InvalidBoxError(BellGamesError):
    """Raised when an operation that needs a valid box receives an invalid one."""

    def __init__(self, message: str, report: ValidationReport) -> None:
        super().__init__(message)
        self.report = report
