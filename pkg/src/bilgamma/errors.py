"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class BilGammaError(Exception):
    """Base class for all errors raised by :mod:`bilgamma`."""


class DomainError(BilGammaError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NoSolutionError(BilGammaError):
    """A martingale measure of the requested kind does not exist.

    ``condition`` names the existence condition that failed, so callers
    (the CLI in particular) can report it without parsing the message.
    """

    def __init__(self, message: str, condition: str = ""):
        super().__init__(message)
        self.condition = condition


class NoMartingaleMeasureError(NoSolutionError, DomainError):
    """The physical measure can never be a martingale measure (lambda_plus <= 1)."""


class ConvergenceError(BilGammaError, RuntimeError):
    """A numerical procedure did not reach its tolerance."""


class PrecisionError(ConvergenceError):
    """The solution exists but a parameter of it is not representable in double precision."""


class ArbitrageBoundsError(DomainError):
    """An option price violates the model-free no-arbitrage bounds."""


class ConfigError(BilGammaError, ValueError):
    """A run configuration could not be parsed or failed validation."""
