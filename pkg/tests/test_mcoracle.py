import math

import numpy as np
import pytest
from scipy import stats

from bilgamma.bgcore import BilateralGammaParams, MarketParams, cumulant, scale_time
from bilgamma.errors import DomainError
from bilgamma.mcoracle import (
    SimConfig,
    gamma_variates,
    mc_exp_moment,
    mc_likelihood_moment,
    mc_martingale_mean,
    mc_price,
    sample_terminal,
)
from bilgamma.measures import p_distance, solve
from bilgamma.pricer import OptionSpec, lewis_price

N = 200_000


def _rng(seed=7):
    return np.random.Generator(np.random.PCG64(seed))


@pytest.mark.parametrize("shape", [0.05, 0.3, 1.0, 2.5, 40.0])
def test_gamma_variates_moments(shape):
    rate = 3.0
    x = gamma_variates(_rng(), shape, rate, N)
    mean, var = shape / rate, shape / rate**2
    assert abs(x.mean() - mean) < 4 * math.sqrt(var / N)
    # Var(s^2) = (kappa4 + 2 sigma^4) / n with kappa4 = 6 shape / rate^4
    se_var = math.sqrt((6 * shape / rate**4 + 2 * var**2) / N)
    assert abs(x.var(ddof=1) - var) < 4 * se_var


@pytest.mark.parametrize("shape", [0.2, 0.9, 1.0, 7.0])
def test_gamma_variates_distribution(shape):
    x = gamma_variates(_rng(11), shape, 2.0, 50_000)
    assert np.all(x >= 0)
    assert stats.kstest(x, stats.gamma(shape, scale=0.5).cdf).pvalue > 1e-3


def test_gamma_variates_rejects_bad_parameters():
    with pytest.raises(DomainError):
        gamma_variates(_rng(), 0.0, 1.0, 10)
    with pytest.raises(DomainError):
        gamma_variates(_rng(), 1.0, -1.0, 10)


@pytest.mark.parametrize("antithetic", [False, True])
@pytest.mark.parametrize("t", [0.5, 3.0])
def test_terminal_moments_match_cumulants(dax, antithetic, t):
    cfg = SimConfig(N, seed=3, antithetic=antithetic)
    x = sample_terminal(dax, t, cfg)
    ap, lp, am, lm = dax.as_tuple()
    mean = t * (ap / lp - am / lm)
    var = t * (ap / lp**2 + am / lm**2)
    k4 = t * 6 * (ap / lp**4 + am / lm**4)
    if antithetic:
        # pair means are independent; the pairing only lowers the variance
        pairs = x.reshape(-1, 2).mean(axis=1)
        assert abs(pairs.mean() - mean) < 4 * pairs.std(ddof=1) / math.sqrt(pairs.size)
    else:
        assert abs(x.mean() - mean) < 4 * math.sqrt(var / N)
        assert abs(x.var(ddof=1) - var) < 4 * math.sqrt((k4 + 2 * var**2) / N)


def test_terminal_law_against_numpy_gamma_sampler(dax):
    x = sample_terminal(dax, 2.0, SimConfig(50_000, seed=5))
    pt = scale_time(dax, 2.0)
    rng = _rng(99)
    y = rng.gamma(pt.alpha_plus, 1 / pt.lambda_plus, 50_000) - rng.gamma(pt.alpha_minus, 1 / pt.lambda_minus, 50_000)
    assert stats.ks_2samp(x, y).pvalue > 1e-3


def test_bit_exact_for_any_worker_count(dax):
    base = sample_terminal(dax, 1.0, SimConfig(300_001, seed=42, chunk_size=1 << 14))
    for workers in (2, 3, 8):
        other = sample_terminal(dax, 1.0, SimConfig(300_001, seed=42, chunk_size=1 << 14, workers=workers))
        assert np.array_equal(base, other)
    anti = SimConfig(300_000, seed=42, chunk_size=1 << 14, antithetic=True)
    assert np.array_equal(sample_terminal(dax, 1.0, anti),
                          sample_terminal(dax, 1.0, SimConfig(**{**anti.__dict__, "workers": 4})))


def test_seed_changes_the_stream(dax):
    a = sample_terminal(dax, 1.0, SimConfig(1000, seed=1))
    b = sample_terminal(dax, 1.0, SimConfig(1000, seed=2))
    assert not np.array_equal(a, b)


def test_antithetic_pairs_are_negatively_correlated():
    law = BilateralGammaParams(2.0, 5.0, 2.0, 5.0)
    pairs = sample_terminal(law, 1.0, SimConfig(10_000, seed=4, antithetic=True)).reshape(-1, 2)
    assert np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1] < -0.5
    independent = sample_terminal(law, 1.0, SimConfig(10_000, seed=4)).reshape(-1, 2)
    assert abs(np.corrcoef(independent[:, 0], independent[:, 1])[0, 1]) < 0.05


def test_sim_config_validation():
    with pytest.raises(DomainError):
        SimConfig(0)
    with pytest.raises(DomainError):
        SimConfig(11, antithetic=True)
    with pytest.raises(DomainError):
        SimConfig(10, seed=-1)
    with pytest.raises(DomainError):
        SimConfig(10, chunk_size=3)
    with pytest.raises(DomainError):
        SimConfig(10, workers=0)


def test_exp_moment(dax):
    cfg = SimConfig(N, seed=8)
    assert mc_exp_moment(dax, 0.0, cfg) == (1.0, 0.0)
    for z in (1.0, -20.0, 30.0):
        est, se = mc_exp_moment(dax, z, cfg)
        assert abs(est - math.exp(cumulant(dax, z))) < 4 * se
    with pytest.raises(DomainError):
        mc_exp_moment(dax, 70.0, cfg)
    with pytest.raises(DomainError):
        mc_exp_moment(dax, -45.0, cfg)


@pytest.mark.parametrize("kind", ["esscher", "bilateral", "p-optimal:2", "p-optimal:1.5"])
def test_discounted_price_is_a_martingale(dax, rate_market, kind):
    law = solve(dax, rate_market, kind).law
    for t in (1.0, 5.0):
        est, se = mc_martingale_mean(law, rate_market, t, SimConfig(N, seed=12))
        assert abs(est - 1.0) < 4 * se


def test_discounted_price_is_a_martingale_under_mmm(mmm_solution, rate_market):
    est, se = mc_martingale_mean(mmm_solution.law, rate_market, 2.0, SimConfig(N, seed=13))
    assert abs(est - 1.0) < 4 * se


def test_physical_measure_is_not_a_martingale_when_rates_are_positive(dax):
    m = MarketParams(r=0.01)
    est, se = mc_martingale_mean(dax, m, 10.0, SimConfig(N, seed=14))
    assert abs(est - 1.0) > 10 * se


@pytest.mark.parametrize("pexp", [1.5, 2.0])
def test_likelihood_moment_matches_p_distance(dax, flat_market, pexp):
    sol = solve(dax, flat_market, f"p-optimal:{pexp:g}")
    tp, tm = sol.params["theta_plus"], sol.params["theta_minus"]
    est, se = mc_likelihood_moment(dax, pexp, tp, tm, SimConfig(N, seed=15))
    assert abs(est - p_distance(dax, pexp, tp, tm)) < 4 * se


def test_likelihood_moment_of_one_is_one(dax):
    est, se = mc_likelihood_moment(dax, 1.0, -5.0, 5.0, SimConfig(N, seed=16))
    assert abs(est - 1.0) < 4 * se


def test_price_agrees_with_contour_integral(bilateral_law, flat_market):
    cfg = SimConfig(N, seed=17)
    for strike, t in [(4900.0, 5.0), (5200.0, 20.0)]:
        for kind in ("call", "put"):
            opt = OptionSpec(strike, t, kind)
            est, se = mc_price(bilateral_law, flat_market, opt, cfg)
            assert abs(est - lewis_price(bilateral_law, flat_market, opt)) < 3 * se
