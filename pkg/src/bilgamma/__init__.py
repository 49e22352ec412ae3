"""Bilateral Gamma stock models: martingale measures, option prices, hedges."""

from .bgcore import BilateralGammaParams, ConvolvedLaw, MarketParams, TiltedLevy
from .errors import (
    ArbitrageBoundsError,
    BilGammaError,
    ConfigError,
    ConvergenceError,
    DomainError,
    NoMartingaleMeasureError,
    NoSolutionError,
    PrecisionError,
)

__version__ = "0.1.0"

__all__ = [
    "BilateralGammaParams",
    "ConvolvedLaw",
    "MarketParams",
    "TiltedLevy",
    "ArbitrageBoundsError",
    "BilGammaError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "NoMartingaleMeasureError",
    "NoSolutionError",
    "PrecisionError",
]
