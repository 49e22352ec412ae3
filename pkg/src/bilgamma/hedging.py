"""Quadratic hedge ratio under the minimal martingale measure.

Under that measure the jump measure becomes ``F^(dx) = (c + 1 - c e^x) F(dx)``
and the hedge ratio of a claim with price function ``pi(t, S)`` is

    Delta = int (e^x - 1)(pi(t, S e^x) - pi(t, S)) F^(dx) / (S (Psi^(2) - 2 Psi^(1))).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _numerics
from .bgcore import BilateralGammaParams, MarketParams, levy_density
from .errors import DomainError
from .measures import mmm_law
from .pricer import ContourSettings, OptionSpec, lewis_price

__all__ = [
    "HedgeSettings",
    "mmm_levy_density",
    "mmm_cumulant",
    "delta_cutoffs",
    "delta_integrand",
    "hedge_delta",
]


@dataclass(frozen=True)
class HedgeSettings:
    """``tail_cut``: the x-range stops where the a priori integrand bound
    drops below this fraction of ``S * (Psi^(2) - 2 Psi^(1))``."""

    quad_rel_tol: float = 1e-8
    tail_cut: float = 1e-14
    contour: ContourSettings = field(default_factory=ContourSettings)

    def __post_init__(self):
        if not (self.quad_rel_tol > 0 and self.tail_cut > 0):
            raise DomainError("hedge tolerances must be positive")


def _check_c(c: float) -> None:
    if not -1.0 <= c <= 0.0:
        raise DomainError(f"c must lie in [-1, 0], got {c}")


def mmm_levy_density(p: BilateralGammaParams, c: float, x):
    """``(c + 1 - c e^x)`` times the bilateral Gamma Levy density."""
    _check_c(c)
    x_arr = np.asarray(x, dtype=float)
    out = (c + 1.0 - c * np.exp(x_arr)) * levy_density(p, x_arr)
    return float(out) if out.ndim == 0 else out


def mmm_cumulant(p: BilateralGammaParams, c: float, z):
    """Cumulant of ``X_1`` under the minimal martingale measure, on ``(-l-, l+ - 1)``."""
    _check_c(c)
    ap, lp, am, lm = p.as_tuple()
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr >= lp - 1.0) or np.any(z_arr <= -lm):
        raise DomainError(f"minimal martingale cumulant defined on ({-lm}, {lp - 1.0}), got z={z}")
    out = (
        -(c + 1.0) * ap * np.log1p(-z_arr / lp)
        - (c + 1.0) * am * np.log1p(z_arr / lm)
        + c * ap * np.log1p(-z_arr / (lp - 1.0))
        + c * am * np.log1p(z_arr / (lm + 1.0))
    )
    return float(out) if out.ndim == 0 else out


def _denominator_gap(p: BilateralGammaParams, c: float) -> float:
    # Psi^(2) - 2 Psi^(1) = int (e^x - 1)^2 F^(dx); each log1p term is exact in closed form
    ap, lp, am, lm = p.as_tuple()
    plain = ap * math.log1p(1.0 / (lp * (lp - 2.0))) + am * math.log1p(1.0 / (lm * (lm + 2.0)))
    shifted = ap * math.log1p(1.0 / ((lp - 1.0) * (lp - 3.0))) + am * math.log1p(
        1.0 / ((lm + 1.0) * (lm + 3.0))
    )
    return (c + 1.0) * plain - c * shifted


def delta_cutoffs(p: BilateralGammaParams, c: float, hs: HedgeSettings = HedgeSettings()) -> tuple[float, float]:
    """``(x_lo, x_hi)`` beyond which ``(e^x - 1)^2 F^(x)`` is below the cut.

    Call prices are ``e^{-q tau}``-Lipschitz in the spot, so this bound
    dominates the hedge integrand divided by ``S``.  The bound decays
    exponentially, so the neglected tails are of the same order.
    """
    target = math.log(hs.tail_cut * _denominator_gap(p, c))

    def log_bound(x: float) -> float:
        return 2.0 * math.log(abs(math.expm1(x))) + math.log(mmm_levy_density(p, c, x))

    out = []
    for sign in (-1.0, 1.0):
        # the bound peaks near |x| ~ 1/rate; start beyond it
        b = 1.0
        while log_bound(sign * b) > target:
            b *= 2.0
        a = b / 2.0
        while log_bound(sign * a) < target and a > 1e-6:
            a /= 2.0
        root = optimize.brentq(lambda y: log_bound(sign * y) - target, a, b, xtol=1e-12)
        out.append(sign * root)
    return out[0], out[1]


def delta_integrand(p: BilateralGammaParams, c: float, m: MarketParams, opt: OptionSpec,
                    t: float, spot: float, hs: HedgeSettings = HedgeSettings()):
    """``x -> (e^x - 1)(pi(t, S e^x) - pi(t, S)) F^(x)`` with cached prices."""
    law = mmm_law(p, c)
    rest = OptionSpec(opt.strike, opt.maturity - t, opt.kind)
    cache: dict[float, float] = {}

    def price(s: float) -> float:
        v = cache.get(s)
        if v is None:
            v = lewis_price(law, MarketParams(m.r, m.q, s), rest, hs.contour)
            cache[s] = v
        return v

    base = price(spot)

    def f(x: float) -> float:
        if x == 0.0:
            return 0.0
        return math.expm1(x) * (price(spot * math.exp(x)) - base) * mmm_levy_density(p, c, x)

    return f


def hedge_delta(p: BilateralGammaParams, c: float, m: MarketParams, opt: OptionSpec,
                t: float, spot: float, hs: HedgeSettings = HedgeSettings()) -> float:
    """Quadratic hedge ratio at time ``t`` and spot ``spot``."""
    _check_c(c)
    if not p.lambda_plus > 3.0:
        raise DomainError(f"the hedge ratio needs lambda_plus > 3, got {p.lambda_plus}")
    if not 0.0 <= t < opt.maturity:
        raise DomainError(f"need 0 <= t < maturity, got t={t}, maturity={opt.maturity}")
    if not spot > 0:
        raise DomainError(f"spot must be positive, got {spot}")
    f = delta_integrand(p, c, m, opt, t, spot, hs)
    x_lo, x_hi = delta_cutoffs(p, c, hs)
    denom = spot * _denominator_gap(p, c)
    # absolute target: quad_rel_tol in units of Delta; prices carry noise near abs_tol * S
    abs_tol = hs.quad_rel_tol * denom
    neg, _ = _numerics.quad(f, x_lo, 0.0, rel_tol=hs.quad_rel_tol, abs_tol=abs_tol, limit=400)
    pos, _ = _numerics.quad(f, 0.0, x_hi, rel_tol=hs.quad_rel_tol, abs_tol=abs_tol, limit=400)
    return math.fsum([neg, pos]) / denom
