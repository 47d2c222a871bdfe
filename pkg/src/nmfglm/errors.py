"""Exception types raised across the package."""

from __future__ import annotations


class NmfGlmError(Exception):
    """Base class for all package errors."""


class ShapeError(NmfGlmError, ValueError):
    """Array dimensions do not line up."""


class NumericError(NmfGlmError, ArithmeticError):
    """A computation produced a non-finite value or failed to converge."""


class DomainError(NmfGlmError, ValueError):
    """An input lies outside its admissible domain.

    ``index`` carries the offending row or coordinate when known.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class UnsupportedPriorError(NmfGlmError, TypeError):
    """The operation is not defined for the given prior kind."""


class PairingError(NmfGlmError, ValueError):
    """A solver was combined with an incompatible prior or family."""


class CapacityError(NmfGlmError, ValueError):
    """Exact computation requested beyond its configured size cap."""


class ParameterError(NmfGlmError, ValueError):
    """Invalid generator or solver parameters."""


class DegenerateTiltError(NmfGlmError, ArithmeticError):
    """A tilted measure has (numerically) zero variance."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class InvalidStateError(NmfGlmError, ValueError):
    """A variational state violates its invariants."""
