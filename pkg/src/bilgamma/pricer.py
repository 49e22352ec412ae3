"""European options by contour integration of the characteristic function.

A call with strike ``K`` and maturity ``T`` on ``S_T = S_0 exp(X_T)`` is

    C = -(e^{-rT} K / 2 pi) int_{Im z = nu} (K/S_0)^{iz} phi_T(-z) dz / (z^2 - iz)

for any ``1 < nu < l+_eff``.  No separate forward factor appears: ``phi_T``
is the characteristic function of ``X_T`` itself, and the carry is already
inside the law when it is a martingale measure (``Psi(1) = r - q``).

With ``z = u + i nu`` the integrand at ``-u`` is the conjugate of the one at
``u``, so only ``u >= 0`` is integrated.  ``[0, L]`` is covered by panels
of doubling length; the remaining tail uses QUADPACK's Fourier-weighted
rule, because the amplitude decays only like ``u^{-2-(a+ + a-)T}``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .bgcore import MarketParams, RiskNeutralLaw, components, law_cumulant, right_rate
from .errors import ArbitrageBoundsError, ConvergenceError, DomainError

__all__ = [
    "OptionSpec",
    "ContourSettings",
    "ContourInfo",
    "VolSurface",
    "admissible_nu",
    "default_nu",
    "lewis_price",
    "bs_price",
    "implied_vol",
    "vol_surface",
]

CALL = "call"
PUT = "put"


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    maturity: float
    kind: str = CALL

    def __post_init__(self):
        if not (math.isfinite(self.strike) and self.strike > 0):
            raise DomainError(f"strike must be positive, got {self.strike}")
        if not (math.isfinite(self.maturity) and self.maturity > 0):
            raise DomainError(f"maturity must be positive, got {self.maturity}")
        if self.kind not in (CALL, PUT):
            raise DomainError(f"option kind must be 'call' or 'put', got {self.kind!r}")


@dataclass(frozen=True)
class ContourSettings:
    """``nu=None`` picks the height minimising the integrand at ``u = 0``.

    ``abs_tol`` is the absolute price tolerance in units of the spot.
    """

    nu: Optional[float] = None
    abs_tol: float = 1e-10
    rel_tol: float = 1e-12
    max_truncation: float = 1e4
    panel_growth: float = 2.0

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise DomainError("contour tolerances must be positive")
        if not self.max_truncation > 0:
            raise DomainError("max_truncation must be positive")
        if not self.panel_growth > 1:
            raise DomainError("panel_growth must exceed 1")


@dataclass(frozen=True)
class ContourInfo:
    nu: float
    truncation: float
    tail: float
    error_estimate: float


@dataclass(frozen=True)
class VolSurface:
    strikes: np.ndarray
    maturities: np.ndarray
    prices: np.ndarray
    implied_vols: np.ndarray


def admissible_nu(law: RiskNeutralLaw) -> tuple[float, float]:
    """Open interval of contour heights: ``(1, smallest right rate)``."""
    top = right_rate(law)
    if not top > 1.0:
        raise DomainError(
            f"no admissible contour: smallest right rate {top} <= 1, so E[exp(X_T)] is infinite"
        )
    return 1.0, top


def default_nu(law: RiskNeutralLaw, log_moneyness: float, maturity: float) -> float:
    """Contour height minimising ``|integrand(u=0)|``.

    The log-modulus ``-k nu + T Psi(nu) - ln(nu (nu - 1))`` is convex in
    ``nu``; its minimiser keeps the integrand O(price) and avoids overflow for
    far-from-the-money strikes where a fixed height would not.
    """
    lo, hi = admissible_nu(law)
    w = hi - lo

    def logmod(nu: float) -> float:
        return -log_moneyness * nu + maturity * law_cumulant(law, nu) - math.log(nu * (nu - 1.0))

    a, b = lo + 1e-9 * w, hi - 1e-9 * w
    res = optimize.minimize_scalar(logmod, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-8 * w})
    nu = float(res.x)
    # keep a little distance from the strip edges
    return min(max(nu, lo + 1e-6 * w), hi - 1e-6 * w)


class _Integrand:
    """Complex amplitude ``G(u)`` with ``Re h(u) = Re(e^{iku} G(u))``."""

    def __init__(self, law: RiskNeutralLaw, maturity: float, k: float, nu: float):
        self.k = k
        self.nu = nu
        # log-prefactor independent of u: -k nu + sum a ln(l)
        self.log_pref = -k * nu
        for c in components(law):
            self.log_pref += maturity * (
                c.alpha_plus * math.log(c.lambda_plus) + c.alpha_minus * math.log(c.lambda_minus)
            )
        self.n_plus = [(c.alpha_plus * maturity, c.lambda_plus - nu) for c in components(law)]
        self.n_minus = [(c.alpha_minus * maturity, c.lambda_minus + nu) for c in components(law)]

    def amplitude(self, u: float) -> complex:
        nu = self.nu
        lg = self.log_pref
        for a, base in self.n_plus:
            lg -= a * cmath.log(complex(base, u))
        for a, base in self.n_minus:
            lg -= a * cmath.log(complex(base, -u))
        z = complex(u, nu)
        return cmath.exp(lg) / (z * (z - 1j))

    def amp_re(self, u: float) -> float:
        return self.amplitude(u).real

    def amp_im(self, u: float) -> float:
        return self.amplitude(u).imag


def _quad(f, a, b, epsabs, epsrel, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, full_output=1, **kw)[:2]


def _panel(f: _Integrand, a: float, b: float, epsabs: float, epsrel: float) -> tuple[float, float]:
    """``int_a^b Re(e^{iku} G(u)) du``; oscillatory weights handled by QAWO/QAWF."""
    k = f.k
    if k == 0.0:
        return _quad(f.amp_re, a, b, epsabs, epsrel, limit=400)
    c = _quad(f.amp_re, a, b, epsabs / 2, epsrel, weight="cos", wvar=k, limit=400)
    s = _quad(f.amp_im, a, b, epsabs / 2, epsrel, weight="sin", wvar=k, limit=400)
    return c[0] - s[0], c[1] + s[1]


def _contour_integral(law, maturity: float, k: float, nu: float, epsabs: float,
                      cs: ContourSettings) -> tuple[float, ContourInfo]:
    f = _Integrand(law, maturity, k, nu)
    # amplitude features live on the scale of nu and of the gap to the strip edge
    first = max(1.0, nu, right_rate(law) - nu)
    total, err = _panel(f, 0.0, first, epsabs / 4, cs.rel_tol)
    a = first
    while a < cs.max_truncation:
        b = min(a * cs.panel_growth, cs.max_truncation)
        part, perr = _panel(f, a, b, epsabs / 4, cs.rel_tol)
        total += part
        err += perr
        a = b
        if abs(part) < max(epsabs, cs.rel_tol * abs(total)) * 1e-2:
            break
    # what remains beyond the last panel; Fourier weights only pay off once the phase
    # turns within the first tail length (QAWF returns wrong tails for tiny k)
    if abs(k) * a >= 1.0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            cre = integrate.quad(f.amp_re, a, np.inf, weight="cos", wvar=k,
                                 epsabs=epsabs / 4, limlst=200, full_output=1)
            sim = integrate.quad(f.amp_im, a, np.inf, weight="sin", wvar=k,
                                 epsabs=epsabs / 4, limlst=200, full_output=1)
        tail = cre[0] - sim[0]
        terr = cre[1] + sim[1]
    elif k != 0.0:
        tail, terr = _quad(lambda u: f.amp_re(u) * math.cos(k * u) - f.amp_im(u) * math.sin(k * u),
                           a, np.inf, epsabs / 4, cs.rel_tol, limit=400)
    else:
        tail, terr = _quad(f.amp_re, a, np.inf, epsabs / 4, cs.rel_tol, limit=400)
    total += tail
    err += terr
    if not math.isfinite(total) or err > max(epsabs, cs.rel_tol * abs(total)) * 10:
        raise ConvergenceError(
            f"contour integral did not converge (estimate {total}, error {err}, "
            f"truncation {a}, nu {nu})"
        )
    return total, ContourInfo(nu=nu, truncation=a, tail=tail, error_estimate=err)


def lewis_price(law: RiskNeutralLaw, m: MarketParams, opt: OptionSpec,
                cs: ContourSettings = ContourSettings(), full_output: bool = False):
    """Price of a European option under a bilateral Gamma type law.

    Puts are obtained from the call by put-call parity.  With
    ``full_output=True`` returns ``(price, ContourInfo)``.
    """
    lo, hi = admissible_nu(law)
    T, K = opt.maturity, opt.strike
    k = math.log(K / m.s0)
    if cs.nu is None:
        nu = default_nu(law, k, T)
    else:
        nu = float(cs.nu)
        if not lo < nu < hi:
            raise DomainError(f"contour height {nu} outside the admissible interval ({lo}, {hi})")
    disc = math.exp(-m.r * T)
    # price error = K disc / pi * integral error; target abs_tol * s0
    epsabs = cs.abs_tol * m.s0 * math.pi / (K * disc)
    integral, info = _contour_integral(law, T, k, nu, epsabs, cs)
    call = -disc * K / math.pi * integral
    if opt.kind == CALL:
        price = call
    else:
        price = call - m.s0 * math.exp(-m.q * T) + K * disc
    if full_output:
        return price, info
    return price


# --------------------------------------------------------------------------
# Black-Scholes reference model


def bs_price(s0: float, strike: float, maturity: float, r: float, q: float, sigma: float,
             kind: str = CALL) -> float:
    """Black-Scholes price of a European call or put."""
    if not (s0 > 0 and strike > 0 and maturity > 0):
        raise DomainError("spot, strike and maturity must be positive")
    if not sigma > 0:
        raise DomainError(f"volatility must be positive, got {sigma}")
    sd = sigma * math.sqrt(maturity)
    fwd_s = s0 * math.exp(-q * maturity)
    disc_k = strike * math.exp(-r * maturity)
    d1 = (math.log(fwd_s / disc_k)) / sd + 0.5 * sd
    d2 = d1 - sd
    if kind == CALL:
        return fwd_s * special.ndtr(d1) - disc_k * special.ndtr(d2)
    if kind == PUT:
        return disc_k * special.ndtr(-d2) - fwd_s * special.ndtr(-d1)
    raise DomainError(f"option kind must be 'call' or 'put', got {kind!r}")


_VOL_LO, _VOL_HI = 1e-6, 5.0


def implied_vol(price: float, s0: float, strike: float, maturity: float, r: float, q: float,
                kind: str = CALL) -> float:
    """Black-Scholes volatility reproducing ``price``, searched on ``[1e-6, 5]``."""
    fwd_s = s0 * math.exp(-q * maturity)
    disc_k = strike * math.exp(-r * maturity)
    if kind == CALL:
        lower, upper = max(fwd_s - disc_k, 0.0), fwd_s
    else:
        lower, upper = max(disc_k - fwd_s, 0.0), disc_k
    if not lower < price < upper:
        raise ArbitrageBoundsError(
            f"price {price} outside the no-arbitrage interval ({lower}, {upper})"
        )

    def gap(sig: float) -> float:
        return bs_price(s0, strike, maturity, r, q, sig, kind) - price

    g_lo = gap(_VOL_LO)
    if g_lo >= 0:
        return _VOL_LO
    if gap(_VOL_HI) < 0:
        raise ConvergenceError(f"implied volatility above {_VOL_HI} for price {price}")
    sigma = optimize.brentq(gap, _VOL_LO, _VOL_HI, xtol=1e-14, rtol=1e-15, maxiter=500)
    return sigma


def vol_surface(law: RiskNeutralLaw, m: MarketParams, strikes: Sequence[float],
                maturities: Sequence[float], cs: ContourSettings = ContourSettings(),
                workers: int = 1, time_scale: float = 1.0) -> VolSurface:
    """Call prices and implied volatilities on a maturity x strike grid.

    ``time_scale`` is the number of model periods per maturity unit (252
    when the law describes daily log returns and maturities are in years).
    Maturities are multiplied by it before pricing, and implied volatilities
    are reported per square root of the maturity unit.  Grid points are
    independent, so ``workers > 1`` fills them concurrently without changing
    any output bit.
    """
    ks = np.asarray(strikes, dtype=float)
    ts = np.asarray(maturities, dtype=float)
    if ks.ndim != 1 or ts.ndim != 1 or ks.size == 0 or ts.size == 0:
        raise DomainError("strikes and maturities must be non-empty 1-D sequences")
    if np.any(np.diff(ks) <= 0) or np.any(np.diff(ts) <= 0):
        raise DomainError("strikes and maturities must be strictly ascending")
    if not (math.isfinite(time_scale) and time_scale > 0):
        raise DomainError(f"time_scale must be positive, got {time_scale}")
    vol_unit = math.sqrt(time_scale)

    def point(ij: tuple[int, int]) -> tuple[float, float]:
        i, j = ij
        T, K = float(ts[i]) * time_scale, float(ks[j])
        try:
            price = lewis_price(law, m, OptionSpec(K, T), cs)
            vol = implied_vol(price, m.s0, K, T, m.r, m.q) * vol_unit
        except Exception as exc:
            raise type(exc)(f"at maturity={ts[i]:g}, strike={K:g}: {exc}") from exc
        return price, vol

    grid = [(i, j) for i in range(ts.size) for j in range(ks.size)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(point, grid))
    else:
        results = [point(ij) for ij in grid]
    prices = np.array([r[0] for r in results]).reshape(ts.size, ks.size)
    vols = np.array([r[1] for r in results]).reshape(ts.size, ks.size)
    return VolSurface(strikes=ks, maturities=ts, prices=prices, implied_vols=vols)
