"""Exception hierarchy for the boltzdv package.

Every failure mode maps to one of four categories: misuse of an API
(:class:`UsageError`), invalid configuration input (:class:`ConfigError`),
a mathematical-domain violation (:class:`DomainError`), or a numerical
failure that must never be reported as a silent value
(:class:`NumericalError` and its subclasses).
"""

from __future__ import annotations


class BoltzdvError(Exception):
    """Base class for all package-specific errors."""


class UsageError(BoltzdvError):
    """An operation was called with arguments violating its contract."""


class ConfigError(BoltzdvError):
    """A configuration file or key is malformed or unknown."""


class DomainError(UsageError):
    """Inputs lie outside the mathematical domain of an operation."""


class ParameterRejection(UsageError):
    """A derived-parameter validity condition failed.

    Carries ``index`` (which derived quantity was violated) and ``margin``
    (by how much) when available.
    """

    def __init__(self, message: str, index: int | None = None,
                 margin: float | None = None):
        super().__init__(message)
        self.index = index
        self.margin = margin


class NumericalError(BoltzdvError):
    """A numerical procedure failed (non-finite values, no convergence)."""


class QuadratureError(NumericalError):
    """An adaptive quadrature did not meet its error tolerance."""


class StepFailure(NumericalError):
    """A time step failed; carries the offending residual when available."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
