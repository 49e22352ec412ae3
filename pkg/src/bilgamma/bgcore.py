"""Bilateral Gamma laws: parameters, cumulants, characteristic functions.

A bilateral Gamma law ``Gamma(a+, l+; a-, l-)`` is the law of ``Y - Z`` with
independent ``Y ~ Gamma(a+, l+)`` and ``Z ~ Gamma(a-, l-)`` (shape, rate).
The associated Levy process has unit-time law with those parameters and
increments over a period ``t`` with shapes scaled by ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ._numerics import half_line_quad
from .errors import DomainError, NoMartingaleMeasureError

__all__ = [
    "BilateralGammaParams",
    "MarketParams",
    "ConvolvedLaw",
    "TiltedLevy",
    "RiskNeutralLaw",
    "components",
    "right_rate",
    "cumulant",
    "cumulant_onesided",
    "law_cumulant",
    "char_fn",
    "log_char_fn",
    "levy_density",
    "levy_integral",
    "scale_time",
    "martingale_residual",
]


@dataclass(frozen=True)
class BilateralGammaParams:
    """Shapes and rates of the unit-time law ``Gamma(a+, l+; a-, l-)``."""

    alpha_plus: float
    lambda_plus: float
    alpha_minus: float
    lambda_minus: float

    def __post_init__(self):
        for name in ("alpha_plus", "lambda_plus", "alpha_minus", "lambda_minus"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, float(v))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha_plus, self.lambda_plus, self.alpha_minus, self.lambda_minus)

    def __str__(self) -> str:
        a, b, c, d = self.as_tuple()
        return f"({a:.12g}, {b:.12g}; {c:.12g}, {d:.12g})"


@dataclass(frozen=True)
class MarketParams:
    """Interest rate ``r``, dividend rate ``q`` and spot ``s0``; requires r >= q >= 0."""

    r: float = 0.0
    q: float = 0.0
    s0: float = 1.0

    def __post_init__(self):
        for name in ("r", "q", "s0"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not self.r >= self.q >= 0.0:
            raise DomainError(f"need r >= q >= 0, got r={self.r}, q={self.q}")
        if not self.s0 > 0.0:
            raise DomainError(f"spot must be positive, got {self.s0}")

    @property
    def carry(self) -> float:
        """Net growth rate ``r - q`` the discounted price must be corrected by."""
        return self.r - self.q


@dataclass(frozen=True)
class ConvolvedLaw:
    """Law of a sum of independent bilateral Gamma variables."""

    components: tuple[BilateralGammaParams, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DomainError("a convolved law needs at least one component")
        for c in comps:
            if not isinstance(c, BilateralGammaParams):
                raise DomainError(f"component {c!r} is not a BilateralGammaParams")
        object.__setattr__(self, "components", comps)

    def __str__(self) -> str:
        return " * ".join(str(c) for c in self.components)


@dataclass(frozen=True)
class TiltedLevy:
    """The minimal entropy law: ``base`` tilted by ``exp(theta * Ytilde)``.

    Neither density nor characteristic function is available in closed form,
    so pricing and simulation functions reject this law.
    """

    base: BilateralGammaParams
    theta: float

    def __post_init__(self):
        if not self.theta <= 0.0:
            raise DomainError(f"tilt parameter must be <= 0, got {self.theta}")

    def __str__(self) -> str:
        return f"tilted {self.base} with theta={self.theta:.12g}"


RiskNeutralLaw = Union[BilateralGammaParams, ConvolvedLaw, TiltedLevy]


def components(law: RiskNeutralLaw) -> tuple[BilateralGammaParams, ...]:
    """Bilateral Gamma components of a law with a closed-form characteristic function."""
    if isinstance(law, BilateralGammaParams):
        return (law,)
    if isinstance(law, ConvolvedLaw):
        return law.components
    if isinstance(law, TiltedLevy):
        raise DomainError("the tilted (minimal entropy) law has no closed-form characteristic function")
    raise TypeError(f"unsupported law {law!r}")


def right_rate(law: RiskNeutralLaw) -> float:
    """Smallest right-tail rate; exponential moments exist below it."""
    return min(c.lambda_plus for c in components(law))


def left_rate(law: RiskNeutralLaw) -> float:
    return min(c.lambda_minus for c in components(law))


def _log1m_ratio(z, lam: float):
    # ln(1 - z / lam); near z = lam the difference lam - z is exact and keeps the digits
    ratio = z / lam
    near = ratio > 0.5
    safe_gap = np.where(near, lam - z, lam)
    return np.where(near, np.log(safe_gap / lam), np.log1p(-np.where(near, 0.0, ratio)))


def cumulant_onesided(alpha: float, lam: float, z):
    """``alpha * ln(lam / (lam - z))``, the cumulant of ``Gamma(alpha, lam)``; needs z < lam."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr >= lam):
        raise DomainError(f"one-sided cumulant needs z < {lam}, got {z}")
    out = -alpha * _log1m_ratio(z_arr, lam)
    return float(out) if out.ndim == 0 else out


def cumulant(p: BilateralGammaParams, z):
    """Cumulant generating function ``ln E[exp(z X_1)]`` on ``(-l-, l+)``."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr >= p.lambda_plus) or np.any(z_arr <= -p.lambda_minus):
        raise DomainError(
            f"cumulant defined on ({-p.lambda_minus}, {p.lambda_plus}), got z={z}"
        )
    out = -p.alpha_plus * _log1m_ratio(z_arr, p.lambda_plus) - p.alpha_minus * _log1m_ratio(
        -z_arr, p.lambda_minus
    )
    return float(out) if out.ndim == 0 else out


def law_cumulant(law: RiskNeutralLaw, z):
    """Cumulant of a (possibly convolved) law: the sum over components."""
    return sum(cumulant(c, z) for c in components(law))


def log_char_fn(law: RiskNeutralLaw, z, t: float = 1.0):
    """Principal logarithm of the characteristic function of ``X_t`` at complex ``z``.

    Valid inside the strip ``-l+ < Im z < l-`` (intersection over components),
    where every base ``1 -+ iz/l`` has positive real part.
    """
    z_arr = np.asarray(z, dtype=complex)
    im = z_arr.imag
    out = np.zeros_like(z_arr)
    for c in components(law):
        if np.any(im <= -c.lambda_plus) or np.any(im >= c.lambda_minus):
            raise DomainError(
                f"characteristic function needs {-c.lambda_plus} < Im z < {c.lambda_minus}"
            )
        out = out - t * (
            c.alpha_plus * np.log(1.0 - 1j * z_arr / c.lambda_plus)
            + c.alpha_minus * np.log(1.0 + 1j * z_arr / c.lambda_minus)
        )
    return complex(out) if out.ndim == 0 else out


def char_fn(law: RiskNeutralLaw, z, t: float = 1.0):
    """Characteristic function ``E[exp(i z X_t)]``."""
    out = np.exp(log_char_fn(law, z, t))
    return complex(out) if np.ndim(out) == 0 else out


def levy_density(p: BilateralGammaParams, x):
    """Levy density ``a+ e^{-l+ x}/x`` for x > 0 and ``a- e^{-l- |x|}/|x|`` for x < 0."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr == 0.0):
        raise DomainError("the Levy density is not defined at x = 0")
    ax = np.abs(x_arr)
    out = np.where(
        x_arr > 0,
        p.alpha_plus * np.exp(-p.lambda_plus * ax) / ax,
        p.alpha_minus * np.exp(-p.lambda_minus * ax) / ax,
    )
    return float(out) if out.ndim == 0 else out


def levy_integral(p: BilateralGammaParams, g: Callable[[float], float], *, rel_tol: float = 1e-10) -> float:
    """``int g(x) F(dx)`` for the bilateral Gamma Levy measure ``F``.

    Each half-line is split at |x| = 1 and the tail is cut once a doubling
    panel adds less than 1e-16 of the running total.  ``g(x)/x`` must stay
    bounded near 0 for the integral to exist.
    """
    ap, lp, am, lm = p.as_tuple()
    pos = half_line_quad(lambda x: g(x) * ap * math.exp(-lp * x) / x, rel_tol=rel_tol)
    neg = half_line_quad(lambda x: g(-x) * am * math.exp(-lm * x) / x, rel_tol=rel_tol)
    return pos + neg


def scale_time(p: BilateralGammaParams, t: float) -> BilateralGammaParams:
    """Law of the increment over a period ``t``: shapes times ``t``, rates unchanged."""
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")
    return BilateralGammaParams(p.alpha_plus * t, p.lambda_plus, p.alpha_minus * t, p.lambda_minus)


def martingale_residual(law: RiskNeutralLaw, m: MarketParams) -> float:
    """``Psi(1) - (r - q)``: zero exactly when the discounted price is a martingale.

    Raises :class:`NoMartingaleMeasureError` when the right rate is <= 1, since
    then ``E[exp(X_1)]`` is infinite and no parameter choice can fix that.
    """
    if right_rate(law) <= 1.0:
        raise NoMartingaleMeasureError(
            f"lambda_plus = {right_rate(law)} <= 1: E[exp(X_1)] is infinite, "
            "so this law is never a martingale measure",
            condition="lambda_plus > 1",
        )
    return law_cumulant(law, 1.0) - m.carry
