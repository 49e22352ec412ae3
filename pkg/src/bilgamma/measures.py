"""Martingale measures for bilateral Gamma stock models.

Five constructions are provided:

* the Esscher transform (one tilt parameter applied to ``X``),
* the minimal entropy martingale measure (Esscher transform of the
  stochastic logarithm of the discounted price),
* the bilateral Esscher transform with least relative entropy,
* the bilateral Esscher transform with least p-distance,
* the minimal martingale measure.

All but the minimal entropy measure keep ``X`` inside the (convolved)
bilateral Gamma family, so their laws can be handed to the pricer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from . import _numerics
from .bgcore import (
    BilateralGammaParams,
    ConvolvedLaw,
    MarketParams,
    RiskNeutralLaw,
    TiltedLevy,
    cumulant,
    law_cumulant,
)
from .errors import ConvergenceError, DomainError, NoSolutionError, PrecisionError

__all__ = [
    "MeasureKind",
    "MeasureSolution",
    "SolverSettings",
    "solve_esscher",
    "memm_drift",
    "memm_entropy",
    "solve_memm",
    "phi_lower_bound",
    "phi_map",
    "esscher_via_fixed_point",
    "bilateral_entropy",
    "entropy_objective",
    "solve_bilateral_esscher",
    "p_distance",
    "log_p_objective",
    "p_feasible_interval",
    "solve_p_optimal",
    "mmm_constant",
    "mmm_law",
    "mmm_conditions",
    "solve_mmm",
    "solve",
]

# physical measure already a martingale measure below this residual
_MARTINGALE_SNAP = 1e-13
# c this close to 0 or -1 collapses the MMM convolution to one component
_C_SNAP = 1e-13
_EPS = np.finfo(float).eps
_LOG_TINY = math.log(np.finfo(float).tiny)
# largest martingale residual accepted from a law whose rates had to be rounded
_REPRESENTABLE_RESIDUAL = 1e-10


class MeasureKind(enum.Enum):
    ESSCHER = "esscher"
    MEMM = "memm"
    BILATERAL_ESSCHER = "bilateral"
    P_OPTIMAL = "p-optimal"
    MINIMAL_MARTINGALE = "mmm"


@dataclass(frozen=True)
class SolverSettings:
    root_tol: float = 1e-12
    quad_rel_tol: float = 1e-10
    max_bracket_expansions: int = 200
    boundary_offset: float = 1e-9

    def __post_init__(self):
        for name in ("root_tol", "quad_rel_tol", "max_bracket_expansions", "boundary_offset"):
            v = getattr(self, name)
            if not v > 0:
                raise DomainError(f"solver setting {name} must be positive, got {v!r}")


@dataclass(frozen=True)
class MeasureSolution:
    """Result of a measure construction.

    ``params`` holds the kind-specific scalars (``theta`` for the Esscher and
    minimal entropy measures, ``theta_plus``/``theta_minus`` for the bilateral
    kinds, ``c`` for the minimal martingale measure).  ``objective`` is the
    relative entropy, the p-distance, or ``None`` for the minimal martingale
    measure.
    """

    kind: MeasureKind
    params: dict
    law: RiskNeutralLaw
    objective: Optional[float]
    residual: float
    pexp: Optional[float] = None
    extra: dict = field(default_factory=dict)


def _esscher_law(p: BilateralGammaParams, theta: float) -> BilateralGammaParams:
    return BilateralGammaParams(
        p.alpha_plus, p.lambda_plus - theta, p.alpha_minus, p.lambda_minus + theta
    )


def _physical_is_martingale(p: BilateralGammaParams, m: MarketParams) -> bool:
    return p.lambda_plus > 1.0 and abs(cumulant(p, 1.0) - m.carry) < _MARTINGALE_SNAP


# --------------------------------------------------------------------------
# Esscher transform


def _log_root(h, top: float, s: SolverSettings, what: str) -> float:
    """Root in ``(0, top]`` of an increasing ``h`` with ``h(top) >= 0``, bracketed in ``log``.

    Returns ``top`` when ``h`` is not positive there (a root at ``top`` up to rounding).
    """
    hi_s = math.log(top)
    if h(math.exp(hi_s)) <= 0.0:
        return top
    lo_s = hi_s - 1.0
    for _ in range(s.max_bracket_expansions):
        if h(math.exp(lo_s)) < 0.0:
            break
        if lo_s <= _LOG_TINY:
            raise _unrepresentable(f"a {what} rate below the smallest double")
        lo_s = max(2.0 * lo_s - hi_s, _LOG_TINY)
    else:
        raise ConvergenceError(f"no sign change while bracketing the {what} root")
    return math.exp(optimize.brentq(lambda t: h(math.exp(t)), lo_s, hi_s,
                                    xtol=1e-300, rtol=4.0 * _EPS, maxiter=400))


def _esscher_root(p: BilateralGammaParams, m: MarketParams,
                  s: SolverSettings) -> tuple[float, BilateralGammaParams]:
    """Esscher tilt and transformed law, solved in the smaller transformed rate.

    The transformed rates ``l+ - 1 - Theta`` and ``l- + Theta`` sum to
    ``l+ + l- - 1``.  Near an end of the tilt interval one of them is far
    below the resolution of ``Theta``, so the root is bracketed in the log of
    the smaller rate and the law is built from it directly.
    """
    ap, lp, am, lm = p.as_tuple()
    total = lp + lm - 1.0

    def g(up: float, down: float) -> float:
        # Psi(1) of the transformed law minus the carry; up = l+ - 1 - Theta, down = l- + Theta
        return ap * math.log1p(1.0 / up) - am * math.log1p(1.0 / down) - m.carry

    half = 0.5 * total
    low_side = g(half, half) >= 0.0
    # h increases in the small rate and is >= 0 at half
    h = (lambda v: g(total - v, v)) if low_side else (lambda v: -g(v, total - v))
    small = _log_root(h, half, s, "Esscher")
    if small < half:
        # Newton polish in the rate itself
        for _ in range(4):
            u, v = (total - small, small) if low_side else (small, total - small)
            slope = ap / (u * (u + 1.0)) + am / (v * (v + 1.0))
            cand = small - h(small) / slope
            if not (0.0 < cand < total and abs(h(cand)) < abs(h(small))):
                break
            small = cand
    if low_side:
        return small - lm, BilateralGammaParams(ap, total + 1.0 - small, am, small)
    if small + 1.0 == 1.0:
        raise _unrepresentable("lambda_plus within one ulp of 1")
    return lp - 1.0 - small, BilateralGammaParams(ap, small + 1.0, am, total - small)


def _entropy_to_law(p: BilateralGammaParams, q: BilateralGammaParams) -> float:
    # bilateral entropy expressed through the transformed rates
    dp = (p.lambda_plus - q.lambda_plus) / q.lambda_plus
    dm = (p.lambda_minus - q.lambda_minus) / q.lambda_minus
    return p.alpha_plus * _g_shift(dp) + p.alpha_minus * _g_shift(dm)


def solve_esscher(p: BilateralGammaParams, m: MarketParams,
                  s: SolverSettings = SolverSettings()) -> MeasureSolution:
    """Esscher martingale measure; exists iff ``l+ + l- > 1``.

    The tilt ``Theta`` is the root in ``(-l-, l+ - 1)`` of the strictly
    increasing map ``Theta -> Psi_Theta(1)``; the transformed law is
    ``Gamma(a+, l+ - Theta; a-, l- + Theta)``.
    """
    if not p.lambda_plus + p.lambda_minus > 1.0:
        raise NoSolutionError(
            f"lambda_plus + lambda_minus = {p.lambda_plus + p.lambda_minus} <= 1: "
            "no Esscher martingale measure exists (Esscher existence condition)",
            condition="lambda_plus + lambda_minus > 1",
        )
    if _physical_is_martingale(p, m):
        theta, law = 0.0, p
    else:
        theta, law = _esscher_root(p, m, s)
        if abs(cumulant(law, 1.0) - m.carry) > _REPRESENTABLE_RESIDUAL:
            # both rates are pinned by their fixed sum, so rounding one cannot be compensated
            raise _unrepresentable("rates too close to the strip edge to meet the martingale condition")
    return MeasureSolution(
        kind=MeasureKind.ESSCHER,
        params={"theta": theta},
        law=law,
        objective=_entropy_to_law(p, law),
        residual=cumulant(law, 1.0) - m.carry,
    )


# --------------------------------------------------------------------------
# Minimal entropy martingale measure


def _expm1_over_x(x: float) -> float:
    return math.expm1(x) / x if x != 0.0 else 1.0


def _check_memm_theta(p: BilateralGammaParams, theta: float) -> None:
    if theta > 0:
        raise DomainError(f"the minimal entropy tilt must be <= 0, got {theta}")
    if theta == 0 and p.lambda_plus <= 1.0:
        raise DomainError("theta = 0 needs lambda_plus > 1 (otherwise E[exp(X_1)] is infinite)")


def memm_drift(p: BilateralGammaParams, m: MarketParams, theta: float,
               s: SolverSettings = SolverSettings()) -> float:
    """Mean of the stochastic logarithm of the discounted price under the tilt ``theta``.

    Strictly increasing in ``theta``; its zero is the minimal entropy tilt.
    """
    _check_memm_theta(p, theta)
    ap, lp, am, lm = p.as_tuple()

    def up(x: float) -> float:
        u = math.expm1(x)
        return _expm1_over_x(x) * math.exp(-lp * x + theta * u)

    def down(x: float) -> float:
        u = math.expm1(-x)
        return -_expm1_over_x(-x) * math.exp(-lm * x + theta * u)

    rel = s.quad_rel_tol
    return (
        ap * _numerics.half_line_quad(up, rel_tol=rel)
        + am * _numerics.half_line_quad(down, rel_tol=rel)
        - m.carry
    )


def memm_entropy(p: BilateralGammaParams, m: MarketParams, theta: float,
                 s: SolverSettings = SolverSettings()) -> float:
    """Relative entropy of the tilt ``theta``: minus the cumulant of the
    stochastic logarithm at ``theta``."""
    _check_memm_theta(p, theta)
    ap, lp, am, lm = p.as_tuple()

    def up(x: float) -> float:
        return math.exp(-lp * x) * math.expm1(theta * math.expm1(x)) / x

    def down(x: float) -> float:
        return math.exp(-lm * x) * math.expm1(theta * math.expm1(-x)) / x

    rel = s.quad_rel_tol
    return (
        -ap * _numerics.half_line_quad(up, rel_tol=rel)
        - am * _numerics.half_line_quad(down, rel_tol=rel)
        + m.carry * theta
    )


def _bracketed_root(fn, lo: float, hi: float, s: SolverSettings) -> float:
    return optimize.brentq(fn, lo, hi, xtol=s.root_tol, rtol=4 * _EPS, maxiter=500)


def solve_memm(p: BilateralGammaParams, m: MarketParams,
               s: SolverSettings = SolverSettings()) -> MeasureSolution:
    """Minimal entropy martingale measure.

    Exists for every ``l+ <= 1``; for ``l+ > 1`` it exists iff
    ``Psi(1) >= r - q``.  The returned law is the tilted Levy descriptor.
    """
    if p.lambda_plus > 1.0:
        psi1 = cumulant(p, 1.0)
        if psi1 < m.carry:
            raise NoSolutionError(
                f"Psi(1) = {psi1:.6g} < r - q = {m.carry:.6g}: no minimal entropy "
                "martingale measure exists (entropy existence inequality)",
                condition="Psi(1) >= r - q",
            )

    def drift(t: float) -> float:
        return memm_drift(p, m, t, s)

    if _physical_is_martingale(p, m):
        theta = 0.0
    else:
        if p.lambda_plus > 1.0:
            hi = 0.0
        else:
            # drift -> +inf as theta -> 0-; walk towards 0 until positive
            hi = -1.0
            for _ in range(s.max_bracket_expansions):
                if drift(hi) > 0:
                    break
                hi *= 0.5
            else:
                raise ConvergenceError("could not bracket the minimal entropy tilt from above")
        prev, lo = hi, hi - 1.0
        for _ in range(s.max_bracket_expansions):
            try:
                d = drift(lo)
            except OverflowError:
                # exp(|theta|) overflowed on the downward side: step back
                lo = 0.5 * (lo + prev)
                continue
            if d < 0:
                break
            prev, lo = lo, 2.0 * lo
        else:
            raise ConvergenceError("could not bracket the minimal entropy tilt from below")
        theta = _bracketed_root(drift, lo, hi, s)
    return MeasureSolution(
        kind=MeasureKind.MEMM,
        params={"theta": theta},
        law=TiltedLevy(p, theta),
        objective=memm_entropy(p, m, theta, s),
        residual=drift(theta),
    )


# --------------------------------------------------------------------------
# Bilateral Esscher transforms


def phi_lower_bound(p: BilateralGammaParams, m: MarketParams) -> float:
    """Left end of the domain of :func:`phi_map` (``-inf`` when r == q)."""
    e = math.expm1(-m.carry / p.alpha_plus)
    if e == 0.0:  # zero carry, or so small that the end is out of range
        return -math.inf
    return p.lambda_plus + 1.0 / e


def phi_map(p: BilateralGammaParams, m: MarketParams, theta: float) -> float:
    """Negative-side tilt that makes ``(theta, phi_map(theta))`` a martingale pair.

    Strictly increasing from ``-inf`` to ``l-`` on
    ``(phi_lower_bound, l+ - 1)``.
    """
    lo = phi_lower_bound(p, m)
    if not lo < theta < p.lambda_plus - 1.0:
        raise DomainError(f"phi_map is defined on ({lo}, {p.lambda_plus - 1.0}), got {theta}")
    return p.lambda_minus - _partner_rate(p, m, p.lambda_plus - 1.0 - theta)


def _partner_rate(p: BilateralGammaParams, m: MarketParams, u: float) -> float:
    """Negative-side rate ``l- - phi_map(theta)`` as a function of ``u = l+ - 1 - theta``.

    Along the martingale curve both transformed rates, ``u + 1`` and this
    one, are functions of ``u``; working with them avoids forming tiny rates
    as differences of tilts.
    """
    x = (p.alpha_plus * math.log1p(1.0 / u) - m.carry) / p.alpha_minus
    # beyond ~709 expm1 overflows; the rate is then below any double
    denom = math.expm1(x) if x < 700.0 else math.inf
    if not denom > 0.0:
        raise DomainError(f"no martingale partner at u={u} (too close to the lower end)")
    return 1.0 / denom


def _u_upper(p: BilateralGammaParams, m: MarketParams) -> float:
    # u = l+ - 1 - theta at the lower end of the phi_map domain
    e = math.expm1(-m.carry / p.alpha_plus)
    return math.inf if e == 0.0 else -1.0 - 1.0 / e


def esscher_via_fixed_point(p: BilateralGammaParams, m: MarketParams,
                            s: SolverSettings = SolverSettings()) -> float:
    """Esscher tilt recovered as the solution of ``phi_map(Theta) = -Theta``."""
    if not p.lambda_plus + p.lambda_minus > 1.0:
        raise NoSolutionError(
            f"lambda_plus + lambda_minus = {p.lambda_plus + p.lambda_minus} <= 1: "
            "no Esscher martingale measure exists (Esscher existence condition)",
            condition="lambda_plus + lambda_minus > 1",
        )
    if _physical_is_martingale(p, m):
        return 0.0
    # with u = l+ - 1 - theta and v = l- - phi_map(theta), the fixed point is u + v = l+ + l- - 1,
    # where v increases with u along the martingale curve.  The smaller of u, v is solved in logs.
    ap, am = p.alpha_plus, p.alpha_minus
    total = p.lambda_plus + p.lambda_minus - 1.0
    half = 0.5 * total

    def u_of_v(v: float) -> float:
        # inverse of _partner_rate
        return 1.0 / math.expm1((am * math.log1p(1.0 / v) + m.carry) / ap)

    if u_of_v(half) + half >= total:
        v = _log_root(lambda v: u_of_v(v) + v - total, half, s, "fixed-point")
        return v - p.lambda_minus
    top = min(half, _u_upper(p, m) * (1.0 - 1e-12))
    u = _log_root(lambda u: u + _partner_rate(p, m, u) - total, top, s, "fixed-point")
    return p.lambda_plus - 1.0 - u


def _g_shift(d: float) -> float:
    # g(1 + d) with g(x) = x - 1 - ln x
    return d - math.log1p(d)


def bilateral_entropy(p: BilateralGammaParams, theta_plus: float, theta_minus: float) -> float:
    """Relative entropy per unit time of the bilateral Esscher transform."""
    if not (theta_plus < p.lambda_plus and theta_minus < p.lambda_minus):
        raise DomainError(
            f"need theta_plus < {p.lambda_plus} and theta_minus < {p.lambda_minus}, "
            f"got ({theta_plus}, {theta_minus})"
        )
    dp = theta_plus / (p.lambda_plus - theta_plus)
    dm = theta_minus / (p.lambda_minus - theta_minus)
    return p.alpha_plus * _g_shift(dp) + p.alpha_minus * _g_shift(dm)


def entropy_objective(p: BilateralGammaParams, m: MarketParams, theta: float) -> float:
    """Entropy along the martingale curve ``theta -> (theta, phi_map(theta))``."""
    return bilateral_entropy(p, theta, phi_map(p, m, theta))


def _curve_law(p: BilateralGammaParams, m: MarketParams, u: float) -> BilateralGammaParams:
    return BilateralGammaParams(p.alpha_plus, u + 1.0, p.alpha_minus, _partner_rate(p, m, u))


def _unrepresentable(what: str) -> PrecisionError:
    return PrecisionError(f"the optimal transformed law has {what}, which double precision cannot store")


def _curve_solution(kind, p, m, u, objective, pexp=None) -> MeasureSolution:
    # snap u so that the stored rate u + 1 is exact; the partner then matches it
    u = (u + 1.0) - 1.0
    if u == 0.0:
        raise _unrepresentable("lambda_plus within one ulp of 1")
    if _partner_rate(p, m, u) == 0.0:
        raise _unrepresentable("a negative-side rate below the smallest double")
    law = _curve_law(p, m, u)
    return MeasureSolution(
        kind=kind,
        params={"theta_plus": p.lambda_plus - 1.0 - u, "theta_minus": p.lambda_minus - law.lambda_minus},
        law=law,
        objective=objective,
        residual=cumulant(law, 1.0) - m.carry,
        pexp=pexp,
    )


def _physical_solution(kind, p, m, objective, pexp=None) -> MeasureSolution:
    return MeasureSolution(
        kind=kind,
        params={"theta_plus": 0.0, "theta_minus": 0.0},
        law=p,
        objective=objective,
        residual=cumulant(p, 1.0) - m.carry,
        pexp=pexp,
    )


def _minimize_log_u(fn, dfn, u_lo: float, u_hi: float, s: SolverSettings) -> tuple[float, float]:
    """Minimise ``fn(u)`` over ``u`` in ``(u_lo, u_hi)``, searching in ``log u``.

    ``u_lo`` may be 0 and ``u_hi`` may be ``inf``.  Golden-section search
    only locates the minimum to about the square root of machine precision,
    so the result is polished by a root of the derivative ``dfn``.
    """
    # an infinite upper end is replaced by a point where every objective here is infinite
    hi = math.log(u_hi) if math.isfinite(u_hi) else 700.0
    lo = math.log(u_lo) if u_lo > 0.0 else -math.inf
    t, value = _numerics.minimize_open_interval(
        lambda t: fn(math.exp(t)),
        lo,
        hi,
        xtol=1e-13,
        boundary_offset=s.boundary_offset,
        max_expansions=s.max_bracket_expansions,
    )
    u = math.exp(t)
    step = 1e-6 * max(1.0, abs(t))
    for _ in range(8):
        a, b = t - step, t + step
        if lo < a and b < hi:
            try:
                da, db = dfn(math.exp(a)), dfn(math.exp(b))
            except (ValueError, ArithmeticError):
                break
            if da < 0.0 < db:
                u = math.exp(optimize.brentq(lambda x: dfn(math.exp(x)), a, b, xtol=1e-15, rtol=4.0 * _EPS))
                return u, fn(u)
        step *= 4.0
    return u, value


def _curve_rates(p: BilateralGammaParams, m: MarketParams, u: float) -> tuple[float, float]:
    # partner rate v and dv/du along the martingale curve
    v = _partner_rate(p, m, u)
    return v, v * (1.0 + v) * p.alpha_plus / (p.alpha_minus * u * (u + 1.0))


def _curve_entropy(p: BilateralGammaParams, m: MarketParams, u: float) -> float:
    return _entropy_to_law(p, _curve_law(p, m, u))


def solve_bilateral_esscher(p: BilateralGammaParams, m: MarketParams,
                            s: SolverSettings = SolverSettings()) -> MeasureSolution:
    """Bilateral Esscher martingale measure of least relative entropy (always exists)."""
    if _physical_is_martingale(p, m):
        return _physical_solution(MeasureKind.BILATERAL_ESSCHER, p, m, 0.0)
    ap, lp, am, lm = p.as_tuple()

    def slope(u: float) -> float:
        v = _partner_rate(p, m, u)
        return -ap * ((lp - 1.0 - u) / (u + 1.0) ** 2 + (lm - v) * (1.0 + v) / (v * u * (u + 1.0)))

    u, value = _minimize_log_u(lambda u: _curve_entropy(p, m, u), slope, 0.0, _u_upper(p, m), s)
    return _curve_solution(MeasureKind.BILATERAL_ESSCHER, p, m, u, value)


def _log_p_distance(p: BilateralGammaParams, pexp: float, tp: float, tm: float) -> float:
    ap, lp, am, lm = p.as_tuple()
    return (
        -ap * math.log1p(-pexp * tp / lp)
        - am * math.log1p(-pexp * tm / lm)
        + pexp * ap * math.log1p(-tp / lp)
        + pexp * am * math.log1p(-tm / lm)
    )


def _log_p_distance_rates(p: BilateralGammaParams, pexp: float, rp: float, rm: float) -> float:
    # same as _log_p_distance with transformed rates rp = l+ - tp, rm = l- - tm
    ap, lp, am, lm = p.as_tuple()
    sp = pexp * rp - (pexp - 1.0) * lp  # l+ - pexp * tp
    sm = pexp * rm - (pexp - 1.0) * lm
    if not (sp > 0.0 and sm > 0.0):
        raise DomainError("outside the feasible p-distance region")
    return (
        -ap * math.log(sp / lp)
        - am * math.log(sm / lm)
        + pexp * ap * math.log(rp / lp)
        + pexp * am * math.log(rm / lm)
    )


def p_distance(p: BilateralGammaParams, pexp: float, theta_plus: float, theta_minus: float) -> float:
    """``E[(dQ/dP)^pexp]`` at time 1 for the bilateral Esscher transform."""
    if not pexp > 1.0:
        raise DomainError(f"the p-distance needs p > 1, got {pexp}")
    if not (theta_plus < p.lambda_plus / pexp and theta_minus < p.lambda_minus / pexp):
        raise DomainError(
            f"need theta_plus < {p.lambda_plus / pexp} and theta_minus < "
            f"{p.lambda_minus / pexp}, got ({theta_plus}, {theta_minus})"
        )
    return math.exp(_log_p_distance(p, pexp, theta_plus, theta_minus))


def log_p_objective(p: BilateralGammaParams, m: MarketParams, pexp: float, theta: float) -> float:
    """Log of the p-distance along the martingale curve."""
    tm = phi_map(p, m, theta)
    if not (theta < p.lambda_plus / pexp and tm < p.lambda_minus / pexp):
        raise DomainError(f"theta={theta} outside the feasible p-distance region")
    return _log_p_distance(p, pexp, theta, tm)


def _p_feasible_u(p: BilateralGammaParams, m: MarketParams, pexp: float) -> tuple[float, float]:
    # feasibility in u = l+ - 1 - theta: theta < l+/pexp and phi_map(theta) < l-/pexp
    ap, lp, am, lm = p.as_tuple()
    u_lo = max(0.0, lp - 1.0 - lp / pexp)
    # phi_map(theta) = l-/pexp exactly when the partner rate is l- (1 - 1/pexp)
    x = (m.carry + am * math.log1p(1.0 / (lm * (1.0 - 1.0 / pexp)))) / ap
    u_lo = max(u_lo, 1.0 / math.expm1(x))
    return u_lo, _u_upper(p, m)


def p_feasible_interval(p: BilateralGammaParams, m: MarketParams, pexp: float,
                        s: SolverSettings = SolverSettings()) -> tuple[float, float]:
    """Open interval of ``theta`` on which the martingale pair has finite p-distance."""
    if not pexp > 1.0:
        raise DomainError(f"the p-distance needs p > 1, got {pexp}")
    u_lo, u_hi = _p_feasible_u(p, m, pexp)
    if not u_lo < u_hi:
        raise NoSolutionError(
            f"no bilateral Esscher martingale pair has finite {pexp}-distance",
            condition="nonempty p-feasible interval",
        )
    return phi_lower_bound(p, m), p.lambda_plus - 1.0 - u_lo


def solve_p_optimal(p: BilateralGammaParams, m: MarketParams, pexp: float,
                    s: SolverSettings = SolverSettings()) -> MeasureSolution:
    """Bilateral Esscher martingale measure of least p-distance."""
    lo, hi = p_feasible_interval(p, m, pexp, s)
    if _physical_is_martingale(p, m) and lo < 0.0 < hi:
        return _physical_solution(MeasureKind.P_OPTIMAL, p, m, 1.0, pexp)
    u_lo, u_hi = _p_feasible_u(p, m, pexp)

    ap, lp, am, lm = p.as_tuple()

    def objective(u: float) -> float:
        return _log_p_distance_rates(p, pexp, u + 1.0, _partner_rate(p, m, u))

    def slope(u: float) -> float:
        v, dv = _curve_rates(p, m, u)
        sp = pexp * (u + 1.0) - (pexp - 1.0) * lp
        sm = pexp * v - (pexp - 1.0) * lm
        return pexp * ap * (1.0 / (u + 1.0) - 1.0 / sp) + pexp * am * (1.0 / v - 1.0 / sm) * dv

    u, logval = _minimize_log_u(objective, slope, u_lo, u_hi, s)
    return _curve_solution(MeasureKind.P_OPTIMAL, p, m, u, math.exp(logval), pexp)


# --------------------------------------------------------------------------
# Minimal martingale measure


def _require_lambda_above(p: BilateralGammaParams, bound: float) -> None:
    if not p.lambda_plus > bound:
        raise DomainError(
            f"lambda_plus = {p.lambda_plus} must exceed {bound:g} "
            "(second exponential moment of the jumps)"
        )


def _second_moment_gap(p: BilateralGammaParams) -> float:
    # Psi(2) - 2 Psi(1) = int (e^x - 1)^2 F(dx), in a cancellation-free form
    ap, lp, am, lm = p.as_tuple()
    return ap * math.log1p(1.0 / (lp * (lp - 2.0))) + am * math.log1p(1.0 / (lm * (lm + 2.0)))


def mmm_constant(p: BilateralGammaParams, m: MarketParams) -> float:
    """``c = (Psi(1) - (r - q)) / (Psi(2) - 2 Psi(1))``; needs ``l+ > 2``."""
    _require_lambda_above(p, 2.0)
    return (cumulant(p, 1.0) - m.carry) / _second_moment_gap(p)


def mmm_law(p: BilateralGammaParams, c: float) -> RiskNeutralLaw:
    """Law of ``X_1`` under the minimal martingale measure for the constant ``c``.

    The convolution of ``Gamma((c+1)a+, l+; (c+1)a-, l-)`` with
    ``Gamma(-c a+, l+ - 1; -c a-, l- + 1)``; a component with zero shape is
    dropped, so ``c = 0`` gives ``p`` and ``c = -1`` the Esscher law at 1.
    """
    if not -1.0 - _C_SNAP <= c <= _C_SNAP:
        raise DomainError(f"the minimal martingale constant must lie in [-1, 0], got {c}")
    _require_lambda_above(p, 1.0)
    ap, lp, am, lm = p.as_tuple()
    if abs(c) <= _C_SNAP:
        return p
    if abs(c + 1.0) <= _C_SNAP:
        return BilateralGammaParams(ap, lp - 1.0, am, lm + 1.0)
    return ConvolvedLaw((
        BilateralGammaParams((c + 1.0) * ap, lp, (c + 1.0) * am, lm),
        BilateralGammaParams(-c * ap, lp - 1.0, -c * am, lm + 1.0),
    ))


def mmm_conditions(p: BilateralGammaParams, m: MarketParams) -> tuple[bool, bool]:
    """The two parameter inequalities equivalent to ``-1 <= c <= 0``, in log form."""
    _require_lambda_above(p, 2.0)
    ap, lp, am, lm = p.as_tuple()
    first = cumulant(p, 1.0) <= m.carry
    second = ap * math.log((lp - 2.0) / (lp - 1.0)) + am * math.log((lm + 2.0) / (lm + 1.0)) <= -m.carry
    return first, second


def solve_mmm(p: BilateralGammaParams, m: MarketParams) -> MeasureSolution:
    """Minimal martingale measure; exists iff ``l+ > 2`` and ``-1 <= c <= 0``."""
    if not p.lambda_plus > 2.0:
        raise NoSolutionError(
            f"lambda_plus = {p.lambda_plus} <= 2: the jumps have no second exponential "
            "moment, so c is undefined",
            condition="lambda_plus > 2",
        )
    c = mmm_constant(p, m)
    cond1, cond2 = mmm_conditions(p, m)
    inside = -1.0 - _C_SNAP <= c <= _C_SNAP
    if inside != (cond1 and cond2) and min(abs(c), abs(c + 1.0)) > 1e-9:
        raise ConvergenceError(
            f"c = {c} and the explicit parameter inequalities disagree ({cond1}, {cond2})"
        )
    if not inside:
        side = "positive" if c > 0 else "below -1"
        raise NoSolutionError(
            f"c = {c:.6g} is {side}: the minimal martingale density is not strictly "
            "positive, so no minimal martingale measure exists (needs -1 <= c <= 0)",
            condition="-1 <= c <= 0",
        )
    c = min(0.0, max(-1.0, c))
    law = mmm_law(p, c)
    return MeasureSolution(
        kind=MeasureKind.MINIMAL_MARTINGALE,
        params={"c": c},
        law=law,
        objective=None,
        residual=law_cumulant(law, 1.0) - m.carry,
        extra={"condition_1": cond1, "condition_2": cond2},
    )


def solve(p: BilateralGammaParams, m: MarketParams, kind: str,
          s: SolverSettings = SolverSettings()) -> MeasureSolution:
    """Dispatch on a kind name: esscher, memm, bilateral, p-optimal:<p>, mmm."""
    name, _, arg = kind.partition(":")
    if name == "esscher":
        return solve_esscher(p, m, s)
    if name == "memm":
        return solve_memm(p, m, s)
    if name == "bilateral":
        return solve_bilateral_esscher(p, m, s)
    if name == "p-optimal":
        try:
            pexp = float(arg) if arg else 2.0
        except ValueError:
            raise DomainError(f"bad exponent in {kind!r}") from None
        return solve_p_optimal(p, m, pexp, s)
    if name == "mmm":
        return solve_mmm(p, m)
    raise DomainError(f"unknown measure kind {kind!r}")
