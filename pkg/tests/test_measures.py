import math
import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from bilgamma.bgcore import BilateralGammaParams, ConvolvedLaw, MarketParams, TiltedLevy, cumulant, law_cumulant
from bilgamma.errors import DomainError, NoSolutionError, PrecisionError
from bilgamma.measures import (
    MeasureKind,
    bilateral_entropy,
    esscher_via_fixed_point,
    memm_drift,
    memm_entropy,
    mmm_conditions,
    mmm_constant,
    mmm_law,
    p_distance,
    p_feasible_interval,
    phi_lower_bound,
    phi_map,
    solve,
    solve_bilateral_esscher,
    solve_esscher,
    solve_memm,
    solve_mmm,
    solve_p_optimal,
)

mpmath.mp.dps = 30


def _levy_integral_mp(p, g):
    """int g(x) F(dx) with mpmath, directly from the Levy density.

    Rates here are ~90 or more, so |x| > 10 carries less than e^-800.
    """
    a, b, c, d = (mpmath.mpf(v) for v in p.as_tuple())
    cuts = [0, 0.001, 0.01, 0.05, 0.2, 1, 10]
    pos = mpmath.quad(lambda x: g(x) * a * mpmath.exp(-b * x) / x, cuts)
    neg = mpmath.quad(lambda x: g(-x) * c * mpmath.exp(-d * x) / x, cuts)
    return float(pos + neg)


def _bilateral_kl_mp(p, tp, tm):
    # relative entropy per unit time: int (Y ln Y - Y + 1) F(dx) with Y the Levy density ratio
    def g(x):
        t = tp if x > 0 else -tm
        y = mpmath.exp(t * x)
        return y * t * x - y + 1
    return _levy_integral_mp(p, g)


def _martingale_partner(p, m, tp):
    """theta_minus with Psi_(tp, tm)(1) = r - q, by bracketing the raw cumulant equation."""
    def resid(tm):
        return cumulant(BilateralGammaParams(p.alpha_plus, p.lambda_plus - tp, p.alpha_minus, p.lambda_minus - tm), 1.0) - m.carry
    lo = -1.0
    while resid(lo) <= 0:
        lo *= 4.0
    return optimize.brentq(resid, lo, p.lambda_minus - 1e-9, xtol=1e-14)


# ---------------------------------------------------------------- Esscher


def test_esscher_root_matches_high_precision_oracle(dax, flat_market):
    a, b, c, d = (mpmath.mpf(v) for v in dax.as_tuple())
    f = lambda t: a * mpmath.log((b - t) / (b - t - 1)) + c * mpmath.log((d + t) / (d + t + 1))
    exact = mpmath.findroot(f, -5.0)
    sol = solve_esscher(dax, flat_market)
    assert sol.params["theta"] == pytest.approx(float(exact), abs=1e-11)
    assert sol.kind is MeasureKind.ESSCHER


def test_esscher_entropy_equals_definition(dax, flat_market):
    sol = solve_esscher(dax, flat_market)
    th = sol.params["theta"]
    assert sol.objective == pytest.approx(_bilateral_kl_mp(dax, th, -th), rel=1e-10)


def test_esscher_needs_rates_summing_above_one(flat_market):
    with pytest.raises(NoSolutionError) as info:
        solve_esscher(BilateralGammaParams(1.0, 0.4, 1.0, 0.5), flat_market)
    assert info.value.condition == "lambda_plus + lambda_minus > 1"


def test_esscher_zero_when_physical_measure_is_martingale():
    p = BilateralGammaParams(2.0, 3.0, 1.0, 2.0)
    m = MarketParams(r=cumulant(p, 1.0), q=0.0)
    assert solve_esscher(p, m).params["theta"] == 0.0


valid = st.builds(
    BilateralGammaParams, st.floats(0.1, 10.0), st.floats(1.5, 200.0), st.floats(0.1, 10.0), st.floats(0.5, 200.0)
)


@settings(max_examples=50, deadline=None)
@given(valid, st.floats(0.0, 0.05), st.floats(0.0, 1.0))
def test_fixed_point_route_agrees_with_direct_root(p, r, qfrac):
    m = MarketParams(r=r, q=r * qfrac)
    fixed = esscher_via_fixed_point(p, m)
    try:
        direct = solve_esscher(p, m).params["theta"]
    except PrecisionError:
        # only when the tilt sits on the strip edge, where the law cannot be stored
        assert p.lambda_plus - 1.0 - fixed < 1e-12
        return
    assert fixed == pytest.approx(direct, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(valid, st.floats(0.0, 0.05))
def test_martingale_condition_after_each_solve(p, r):
    m = MarketParams(r=r)
    for kind in ("esscher", "bilateral", "p-optimal:2"):
        try:
            sol = solve(p, m, kind)
        except (NoSolutionError, PrecisionError):
            continue
        assert abs(law_cumulant(sol.law, 1.0) - m.carry) < 1e-10


def test_unrepresentable_optimum_is_reported():
    # the entropy minimiser needs lambda_plus = 1 + 1e-19 here
    p, m = BilateralGammaParams(0.125, 4.0, 5.0, 0.5), MarketParams()
    with pytest.raises(PrecisionError):
        solve_bilateral_esscher(p, m)
    # the Esscher and 2-optimal laws of the same model are fine
    for kind in ("esscher", "p-optimal:2"):
        assert abs(law_cumulant(solve(p, m, kind).law, 1.0)) < 1e-10
    # Esscher tilt 6e-15 below its upper end
    q = BilateralGammaParams(0.109375, 1.5, 7.0, 1.0)
    with pytest.raises(PrecisionError):
        solve_esscher(q, m)


# ---------------------------------------------------------------- MEMM


def test_memm_drift_root_and_entropy_against_definitions(dax, flat_market):
    sol = solve_memm(dax, flat_market)
    th = sol.params["theta"]
    assert isinstance(sol.law, TiltedLevy) and th < 0
    drift = _levy_integral_mp(dax, lambda x: mpmath.expm1(x) * mpmath.exp(th * mpmath.expm1(x)))
    assert abs(drift - flat_market.carry) < 1e-11

    def kl(x):
        u = th * mpmath.expm1(x)
        y = mpmath.exp(u)
        return u * y - y + 1

    assert sol.objective == pytest.approx(_levy_integral_mp(dax, kl), rel=1e-9)


def test_memm_drift_increasing(dax, flat_market):
    vals = [memm_drift(dax, flat_market, t) for t in (-40.0, -10.0, -5.0, -1.0, 0.0)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_memm_absent_when_growth_below_carry(dax, rate_market):
    with pytest.raises(NoSolutionError) as info:
        solve_memm(dax, rate_market)
    assert info.value.condition == "Psi(1) >= r - q"


def test_memm_exists_for_small_right_rate():
    # lambda_plus <= 1: always exists; the tilt makes the drift finite
    p = BilateralGammaParams(1.0, 0.8, 1.0, 5.0)
    sol = solve_memm(p, MarketParams(r=0.01))
    assert sol.params["theta"] < 0
    assert abs(memm_drift(p, MarketParams(r=0.01), sol.params["theta"])) < 1e-9
    with pytest.raises(DomainError):
        memm_drift(p, MarketParams(), 0.0)


def test_memm_entropy_below_every_bilateral_pair(dax, flat_market):
    memm = solve_memm(dax, flat_market).objective
    for t in np.linspace(-7.0, -4.0, 13):
        assert memm <= bilateral_entropy(dax, t, _martingale_partner(dax, flat_market, t)) + 1e-15


# ---------------------------------------------------------------- bilateral Esscher


def test_phi_map_gives_martingale_pairs(dax, rate_market):
    lo = phi_lower_bound(dax, rate_market)
    for t in np.linspace(lo + 1.0, dax.lambda_plus - 1.5, 7):
        tm = phi_map(dax, rate_market, t)
        law = BilateralGammaParams(dax.alpha_plus, dax.lambda_plus - t, dax.alpha_minus, dax.lambda_minus - tm)
        assert cumulant(law, 1.0) == pytest.approx(rate_market.carry, abs=1e-13)
        assert tm == pytest.approx(_martingale_partner(dax, rate_market, t), rel=1e-12, abs=1e-8)


def test_phi_map_domain(dax, flat_market, rate_market):
    assert phi_lower_bound(dax, flat_market) == -math.inf
    assert math.isfinite(phi_lower_bound(dax, rate_market))
    with pytest.raises(DomainError):
        phi_map(dax, flat_market, dax.lambda_plus - 1.0)


def test_bilateral_minimiser_against_brute_force(dax, flat_market):
    sol = solve_bilateral_esscher(dax, flat_market)
    grid = np.linspace(-6.0, -4.7, 131)
    ent = [bilateral_entropy(dax, t, _martingale_partner(dax, flat_market, t)) for t in grid]
    best = grid[int(np.argmin(ent))]
    assert abs(sol.params["theta_plus"] - best) <= 0.01
    assert sol.objective <= min(ent) + 1e-15
    tp, tm = sol.params["theta_plus"], sol.params["theta_minus"]
    assert sol.objective == pytest.approx(_bilateral_kl_mp(dax, tp, tm), rel=1e-10)


def test_bilateral_esscher_entropy_below_esscher(dax, rate_market):
    ess = solve_esscher(dax, rate_market)
    bil = solve_bilateral_esscher(dax, rate_market)
    assert bil.objective <= ess.objective + 1e-15


# ---------------------------------------------------------------- p-optimal


def test_p_distance_matches_levy_integral(dax):
    tp, tm, pexp = -5.0, 4.0, 2.0

    def g(x):
        t = tp if x > 0 else -tm
        y = mpmath.exp(t * x)
        return y**pexp - pexp * y + pexp - 1

    assert p_distance(dax, pexp, tp, tm) == pytest.approx(math.exp(_levy_integral_mp(dax, g)), rel=1e-12)


def test_p_optimal_minimiser_against_brute_force(dax, flat_market):
    sol = solve_p_optimal(dax, flat_market, 2.0)
    grid = np.linspace(-6.5, -5.0, 151)
    vals = [p_distance(dax, 2.0, t, _martingale_partner(dax, flat_market, t)) for t in grid]
    assert abs(sol.params["theta_plus"] - grid[int(np.argmin(vals))]) <= 0.01
    assert sol.objective <= min(vals) * (1 + 1e-14)


def test_p_optimal_tends_to_bilateral_esscher(dax, flat_market):
    target = solve_bilateral_esscher(dax, flat_market).params["theta_plus"]
    gaps = [abs(solve_p_optimal(dax, flat_market, p).params["theta_plus"] - target) for p in (2.0, 1.5, 1.1, 1.01)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.05


def test_p_feasible_interval_respects_caps(dax, flat_market):
    lo, hi = p_feasible_interval(dax, flat_market, 3.0)
    assert hi <= dax.lambda_plus / 3.0
    assert phi_map(dax, flat_market, hi * (1 - 1e-9) if hi > 0 else hi - 1e-9) < dax.lambda_minus / 3.0 + 1e-9
    with pytest.raises(DomainError):
        p_distance(dax, 1.0, 0.0, 0.0)


def test_solve_dispatch_parses_exponent(dax, flat_market):
    assert solve(dax, flat_market, "p-optimal:1.5").pexp == 1.5
    with pytest.raises(DomainError):
        solve(dax, flat_market, "p-optimal:abc")
    with pytest.raises(DomainError):
        solve(dax, flat_market, "nonsense")


# ---------------------------------------------------------------- minimal martingale measure


def test_mmm_constant_from_cumulants(dax, rate_market):
    c = mmm_constant(dax, rate_market)
    direct = (cumulant(dax, 1.0) - 0.0012) / (cumulant(dax, 2.0) - 2 * cumulant(dax, 1.0))
    assert c == pytest.approx(direct, rel=1e-9)


def test_mmm_law_is_martingale_and_convolved(dax, rate_market):
    sol = solve_mmm(dax, rate_market)
    c = sol.params["c"]
    assert isinstance(sol.law, ConvolvedLaw) and len(sol.law.components) == 2
    assert abs(law_cumulant(sol.law, 1.0) - 0.0012) < 1e-12
    assert sol.extra == {"condition_1": True, "condition_2": True}
    # cumulant of the convolution equals the four-term MMM cumulant written out by hand
    a, b, cc, d = dax.as_tuple()
    z = 1.7
    hand = ((c + 1) * a * math.log(b / (b - z)) + (c + 1) * cc * math.log(d / (d + z))
            - c * a * math.log((b - 1) / (b - 1 - z)) - c * cc * math.log((d + 1) / (d + 1 + z)))
    assert law_cumulant(sol.law, z) == pytest.approx(hand, rel=1e-12)


def test_mmm_absent_for_flat_rates(dax, flat_market):
    assert mmm_constant(dax, flat_market) > 0
    assert mmm_conditions(dax, flat_market) == (False, True)
    with pytest.raises(NoSolutionError) as info:
        solve_mmm(dax, flat_market)
    assert info.value.condition == "-1 <= c <= 0"


def test_mmm_law_collapses_at_endpoints(dax):
    assert mmm_law(dax, 0.0) == dax
    assert mmm_law(dax, -1.0) == BilateralGammaParams(1.55, 132.96, 0.94, 89.92)
    with pytest.raises(DomainError):
        mmm_law(dax, 0.5)


def test_mmm_needs_second_exponential_moment(flat_market):
    with pytest.raises(NoSolutionError) as info:
        solve_mmm(BilateralGammaParams(1.0, 1.8, 1.0, 3.0), flat_market)
    assert info.value.condition == "lambda_plus > 2"
