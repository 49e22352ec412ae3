"""Monte Carlo oracle for bilateral Gamma laws.

Terminal values are drawn as differences of Gamma variates.  The generator
is pinned: Marsaglia-Tsang squeeze acceptance for shape >= 1, and for
shape < 1 a draw at shape + 1 multiplied by ``U^(1/shape)``.  Antithetic
runs switch to inverse-CDF sampling so that pairs ``(U, 1 - U)`` exist.

Samples are produced in chunks; chunk ``i`` owns the stream
``PCG64(SeedSequence(seed, spawn_key=(i,)))``, and chunks are concatenated
in index order, so results do not depend on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .bgcore import (
    BilateralGammaParams,
    MarketParams,
    RiskNeutralLaw,
    components,
    right_rate,
)
from .errors import DomainError
from .pricer import CALL, OptionSpec

__all__ = [
    "SimConfig",
    "gamma_variates",
    "sample_terminal",
    "mc_price",
    "mc_exp_moment",
    "mc_martingale_mean",
    "mc_likelihood_moment",
]

_MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class SimConfig:
    n_samples: int
    seed: int = 20240601
    antithetic: bool = False
    chunk_size: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise DomainError(f"n_samples must be a positive integer, got {self.n_samples}")
        if not 0 <= int(self.seed) <= _MAX_SEED:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.chunk_size < 2 or self.chunk_size % 2:
            raise DomainError(f"chunk_size must be an even integer >= 2, got {self.chunk_size}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")
        if self.antithetic and self.n_samples % 2:
            raise DomainError("antithetic sampling needs an even number of samples")


def gamma_variates(rng: np.random.Generator, shape: float, rate: float, n: int) -> np.ndarray:
    """``n`` draws from ``Gamma(shape, rate)`` (mean ``shape / rate``)."""
    if not (shape > 0 and rate > 0):
        raise DomainError(f"gamma shape and rate must be positive, got ({shape}, {rate})")
    a = shape if shape >= 1.0 else shape + 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        m = todo.size
        x = rng.standard_normal(m)
        u = rng.random(m)
        v = 1.0 + c * x
        ok = v > 0
        v = np.where(ok, v * v * v, 1.0)
        x2 = x * x
        accept = ok & (
            (u < 1.0 - 0.0331 * x2 * x2)
            | (np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v)))
        )
        out[todo[accept]] = d * v[accept]
        todo = todo[~accept]
    if shape < 1.0:
        # boost: G(shape) = G(shape + 1) * U^(1/shape), done in logs to delay underflow
        u = rng.random(n)
        out = np.exp(np.log(out) + np.log(u) / shape)
    return out / rate


def _inverse_gamma(u: np.ndarray, shape: float, rate: float) -> np.ndarray:
    return special.gammaincinv(shape, u) / rate


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(index,))))


def _chunks(cfg: SimConfig) -> list[tuple[int, int]]:
    n, size = int(cfg.n_samples), cfg.chunk_size
    return [(i, min(size, n - i * size)) for i in range((n + size - 1) // size)]


def _one_sided(rng, shape: float, rate: float, n: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return gamma_variates(rng, shape, rate, n)
    u = rng.random(n // 2)
    # interleave so that entries 2j and 2j + 1 form an antithetic pair
    return _inverse_gamma(np.column_stack([u, 1.0 - u]).ravel(), shape, rate)


def _parts(law: RiskNeutralLaw, t: float, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Summed positive and negative Gamma parts ``(Y, Z)`` with ``X_t = Y - Z``."""
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")
    comps = components(law)

    def run(chunk: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        index, n = chunk
        rng = _chunk_rng(cfg.seed, index)
        y = np.zeros(n)
        z = np.zeros(n)
        for c in comps:
            y += _one_sided(rng, c.alpha_plus * t, c.lambda_plus, n, cfg.antithetic)
            z += _one_sided(rng, c.alpha_minus * t, c.lambda_minus, n, cfg.antithetic)
        return y, z

    chunks = _chunks(cfg)
    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(ch) for ch in chunks]
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def sample_terminal(law: RiskNeutralLaw, t: float, cfg: SimConfig) -> np.ndarray:
    """``cfg.n_samples`` draws of ``X_t``."""
    y, z = _parts(law, t, cfg)
    return y - z


def _mean_and_se(values: np.ndarray, cfg: SimConfig) -> tuple[float, float]:
    if cfg.antithetic:
        values = values.reshape(-1, 2).mean(axis=1)
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return mean, se


def mc_price(law: RiskNeutralLaw, m: MarketParams, opt: OptionSpec,
             cfg: SimConfig) -> tuple[float, float]:
    """Discounted mean payoff on ``S_T = S_0 exp(X_T)`` and its standard error."""
    if not right_rate(law) > 1.0:
        raise DomainError("E[exp(X_T)] is infinite: the smallest right rate must exceed 1")
    x = sample_terminal(law, opt.maturity, cfg)
    st = m.s0 * np.exp(x)
    if opt.kind == CALL:
        pay = np.maximum(st - opt.strike, 0.0)
    else:
        pay = np.maximum(opt.strike - st, 0.0)
    mean, se = _mean_and_se(pay, cfg)
    disc = math.exp(-m.r * opt.maturity)
    return disc * mean, disc * se


def mc_exp_moment(p: BilateralGammaParams, z: float, cfg: SimConfig) -> tuple[float, float]:
    """Estimate of ``E[exp(z X_1)]`` and its standard error.

    ``z`` must keep ``2z`` inside ``(-l-, l+)`` so that the estimator has
    finite variance.
    """
    if not -p.lambda_minus < 2.0 * z < p.lambda_plus:
        raise DomainError(
            f"need 2z in ({-p.lambda_minus}, {p.lambda_plus}) for a finite-variance estimate, got z={z}"
        )
    if z == 0.0:
        return 1.0, 0.0
    x = sample_terminal(p, 1.0, cfg)
    return _mean_and_se(np.exp(z * x), cfg)


def mc_martingale_mean(law: RiskNeutralLaw, m: MarketParams, t: float,
                       cfg: SimConfig) -> tuple[float, float]:
    """Mean of ``exp(X_t - (r - q) t)``; equals 1 under a martingale measure."""
    if not 2.0 < right_rate(law):
        raise DomainError("finite variance of exp(X_t) needs the smallest right rate above 2")
    x = sample_terminal(law, t, cfg)
    return _mean_and_se(np.exp(x - m.carry * t), cfg)


def mc_likelihood_moment(p: BilateralGammaParams, pexp: float, theta_plus: float,
                         theta_minus: float, cfg: SimConfig) -> tuple[float, float]:
    """Estimate of ``E[L^pexp]`` for the bilateral Esscher density ``L`` at time 1.

    With ``X = Y - Z`` the density is
    ``((l+ - t+)/l+)^{a+} e^{t+ Y} ((l- - t-)/l-)^{a-} e^{t- Z}``.
    """
    ap, lp, am, lm = p.as_tuple()
    if not (2.0 * pexp * theta_plus < lp and 2.0 * pexp * theta_minus < lm):
        raise DomainError("the estimator of E[L^p] needs 2 p theta below each rate")
    y, z = _parts(p, 1.0, cfg)
    log_l = (
        ap * math.log1p(-theta_plus / lp)
        + am * math.log1p(-theta_minus / lm)
        + theta_plus * y
        + theta_minus * z
    )
    return _mean_and_se(np.exp(pexp * log_l), cfg)
