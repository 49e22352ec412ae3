"""Self-checks run by ``bilgamma validate`` against a configuration.

Every check either passes, fails with a diagnostic, or is skipped because
the configured parameters do not admit the object under test (for example
no Esscher measure exists).  Checks are independent of each other.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import bgcore, hedging, mcoracle, measures, pricer
from .config import RunConfig
from .errors import NoSolutionError

__all__ = ["CheckResult", "Skip", "CHECKS", "run_checks"]


class Skip(Exception):
    """Raised by a check that does not apply to the configuration."""


class Failed(Exception):
    pass


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # "pass", "fail" or "skip"
    detail: str
    seconds: float


def _require(ok: bool, detail: str) -> str:
    if not ok:
        raise Failed(detail)
    return detail


def _solve_or_skip(cfg: RunConfig, kind: str) -> measures.MeasureSolution:
    try:
        return measures.solve(cfg.model, cfg.market, kind, cfg.solver)
    except NoSolutionError as exc:
        raise Skip(f"{kind} measure does not exist: {exc.condition or exc}") from None


def _law_sd(law, t: float) -> float:
    var = sum(c.alpha_plus / c.lambda_plus**2 + c.alpha_minus / c.lambda_minus**2
              for c in bgcore.components(law))
    return math.sqrt(var * t)


def _strikes(cfg: RunConfig, law, t: float, zs) -> list[float]:
    sd = _law_sd(law, t)
    return [cfg.market.s0 * math.exp(z * sd) for z in zs]


def check_esscher(cfg: RunConfig) -> str:
    sol = _solve_or_skip(cfg, "esscher")
    return _require(abs(sol.residual) < 1e-10,
                    f"theta={sol.params['theta']:.10g}, residual={sol.residual:.2e}")


def check_memm(cfg: RunConfig) -> str:
    sol = _solve_or_skip(cfg, "memm")
    p = cfg.model
    # the drift is a difference of terms of size a/l and r - q
    scale = p.alpha_plus / p.lambda_plus + p.alpha_minus / p.lambda_minus + abs(cfg.market.carry)
    tol = 10 * cfg.solver.quad_rel_tol * scale
    return _require(abs(sol.residual) < tol,
                    f"theta={sol.params['theta']:.10g}, drift={sol.residual:.2e}")


def check_bilateral(cfg: RunConfig) -> str:
    sol = _solve_or_skip(cfg, "bilateral")
    return _require(abs(sol.residual) < 1e-10,
                    f"theta+={sol.params['theta_plus']:.10g}, residual={sol.residual:.2e}")


def check_p_optimal(cfg: RunConfig) -> str:
    bil = _solve_or_skip(cfg, "bilateral")
    thetas = {}
    for pexp in (2.0, 1.5, 1.1, 1.01):
        sol = _solve_or_skip(cfg, f"p-optimal:{pexp}")
        _require(abs(sol.residual) < 1e-10, f"p={pexp}: residual {sol.residual:.2e}")
        thetas[pexp] = sol.params["theta_plus"]
    gap = abs(thetas[1.01] - bil.params["theta_plus"])
    return _require(gap < 0.05, f"theta_2={thetas[2.0]:.6g}, |theta_1.01 - theta|={gap:.2e}")


def check_entropy_order(cfg: RunConfig) -> str:
    e = {k: _solve_or_skip(cfg, k).objective for k in ("memm", "bilateral", "esscher")}
    ok = e["memm"] <= e["bilateral"] + 1e-12 and e["bilateral"] <= e["esscher"] + 1e-12
    return _require(ok, f"memm={e['memm']:.10g} <= bilateral={e['bilateral']:.10g} <= esscher={e['esscher']:.10g}")


def check_fixed_point(cfg: RunConfig) -> str:
    direct = _solve_or_skip(cfg, "esscher").params["theta"]
    fp = measures.esscher_via_fixed_point(cfg.model, cfg.market, cfg.solver)
    return _require(abs(fp - direct) < 1e-10, f"|difference|={abs(fp - direct):.2e}")


def check_mmm(cfg: RunConfig) -> str:
    if not cfg.model.lambda_plus > 2.0:
        raise Skip("minimal martingale measure needs lambda_plus > 2")
    c = measures.mmm_constant(cfg.model, cfg.market)
    cond = measures.mmm_conditions(cfg.model, cfg.market)
    _require((-1.0 <= c <= 0.0) == all(cond), f"c={c:.6g} disagrees with conditions {cond}")
    if not -1.0 <= c <= 0.0:
        return f"c={c:.6g}: no minimal martingale measure, consistent with conditions {cond}"
    sol = measures.solve_mmm(cfg.model, cfg.market)
    return _require(abs(sol.residual) < 1e-10, f"c={c:.6g}, residual={sol.residual:.2e}")


def _mc_points(cfg: RunConfig, law, market, points) -> str:
    worst = 0.0
    for i, (z, t) in enumerate(points):
        k = _strikes(cfg, law, t, [z])[0]
        opt = pricer.OptionSpec(k, t)
        lp = pricer.lewis_price(law, market, opt, cfg.contour)
        sim = replace(cfg.sim, seed=(cfg.sim.seed + 7919 * i) % 2**64)
        mp, se = mcoracle.mc_price(law, market, opt, sim)
        dev = abs(lp - mp) / se
        worst = max(worst, dev)
        _require(dev < 3.0, f"K={k:.6g}, T={t}: lewis={lp:.8g}, mc={mp:.8g} +- {se:.2g} ({dev:.2f} SE)")
    return f"{len(points)} points, worst deviation {worst:.2f} SE"


def check_price_vs_mc(cfg: RunConfig) -> str:
    law = _solve_or_skip(cfg, "bilateral").law
    points = [(-1.0, 0.25), (0.0, 0.25), (1.0, 0.25), (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)]
    return _mc_points(cfg, law, cfg.market, points)


def check_price_vs_mc_mmm(cfg: RunConfig) -> str:
    if not cfg.model.lambda_plus > 2.0:
        raise Skip("minimal martingale measure needs lambda_plus > 2")
    law = _solve_or_skip(cfg, "mmm").law
    return _mc_points(cfg, law, cfg.market, [(-0.5, 0.5), (0.0, 1.0), (0.5, 2.0)])


def check_contour_invariance(cfg: RunConfig) -> str:
    law = _solve_or_skip(cfg, "bilateral").law
    lo, hi = pricer.admissible_nu(law)
    nus = [lo + (hi - lo) * f for f in (0.02, 0.05, 0.1, 0.2, 0.35)]
    worst = 0.0
    for t in (0.25, 1.0):
        for k in _strikes(cfg, law, t, (-1.0, 0.0, 1.0)):
            prices = [pricer.lewis_price(law, cfg.market, pricer.OptionSpec(k, t),
                                         replace(cfg.contour, nu=nu)) for nu in nus]
            spread = (max(prices) - min(prices)) / abs(prices[0])
            worst = max(worst, spread)
            _require(spread < 1e-8, f"K={k:.6g}, T={t}: relative spread {spread:.2e} over nu={nus}")
    return f"worst relative spread {worst:.2e}"


def check_parity(cfg: RunConfig) -> str:
    law = _solve_or_skip(cfg, "bilateral").law
    m = cfg.market
    worst = 0.0
    for t in (0.1, 0.25, 0.5, 1.0, 2.0):
        for k in _strikes(cfg, law, t, (-2.0, -1.0, 0.0, 1.0, 2.0)):
            call = pricer.lewis_price(law, m, pricer.OptionSpec(k, t, "call"), cfg.contour)
            put = pricer.lewis_price(law, m, pricer.OptionSpec(k, t, "put"), cfg.contour)
            fwd = m.s0 * math.exp(-m.q * t) - k * math.exp(-m.r * t)
            rel = abs(call - put - fwd) / max(abs(fwd), m.s0 * 1e-8, abs(call))
            worst = max(worst, rel)
            _require(rel < 1e-8, f"K={k:.6g}, T={t}: parity error {rel:.2e}")
    return f"worst relative parity error {worst:.2e}"


def check_skew(cfg: RunConfig) -> str:
    law = _solve_or_skip(cfg, "bilateral").law
    third = sum(c.alpha_plus / c.lambda_plus**3 - c.alpha_minus / c.lambda_minus**3
                for c in bgcore.components(law))
    if third >= 0:
        # a downward sloping smile is only expected from a left-skewed law
        raise Skip(f"pricing law is not left-skewed (third cumulant {2 * third:.3g} per unit time)")
    s0 = cfg.market.s0
    strikes = s0 * np.arange(0.8, 1.2 + 1e-9, 0.05)
    surf = pricer.vol_surface(law, cfg.market, strikes, [0.25, 0.5, 1.0, 2.0], cfg.contour,
                              time_scale=cfg.surface.time_scale)
    for i, t in enumerate(surf.maturities):
        _require(bool(np.all(np.diff(surf.implied_vols[i]) < 0)),
                 f"implied vol not strictly decreasing in strike at T={t}")
    spread = surf.implied_vols.max(axis=1) - surf.implied_vols.min(axis=1)
    return _require(bool(np.all(np.diff(spread) < 0)), f"vol spread by maturity {np.round(spread, 6).tolist()}")


def check_hedge_limits(cfg: RunConfig) -> str:
    p, m = cfg.model, cfg.market
    if not p.lambda_plus > 3.0:
        raise Skip("hedge ratio needs lambda_plus > 3")
    c = _solve_or_skip(cfg, "mmm").params["c"]
    s = m.s0
    t_mat = 0.5
    d0 = hedging.hedge_delta(p, c, m, pricer.OptionSpec(1e-9 * s, t_mat), 0.0, s, cfg.hedge)
    dinf = hedging.hedge_delta(p, c, m, pricer.OptionSpec(1e6 * s, t_mat), 0.0, s, cfg.hedge)
    datm = hedging.hedge_delta(p, c, m, pricer.OptionSpec(s, t_mat), 0.0, s, cfg.hedge)
    fwd = math.exp(-m.q * t_mat)
    _require(abs(d0 - fwd) < 1e-4, f"K->0: delta={d0:.10g}, expected {fwd:.10g}")
    _require(abs(dinf) < 1e-6, f"K->inf: delta={dinf:.3g}")
    return _require(0.0 < datm < 1.0, f"K->0 {d0:.8f}, K->inf {dinf:.2g}, ATM {datm:.8f}")


def check_properties(cfg: RunConfig) -> str:
    p = cfg.model
    _require(bgcore.cumulant(p, 0.0) == 0.0, "Psi(0) != 0")
    _require(bgcore.char_fn(p, 0.0) == 1.0, "phi(0) != 1")
    us = np.linspace(-50.0, 50.0, 101)
    phi = bgcore.char_fn(p, us)
    _require(bool(np.all(np.abs(phi) <= 1.0 + 1e-15)), "|phi(u)| > 1")
    _require(bool(np.allclose(phi[::-1], np.conj(phi), rtol=1e-15, atol=0)), "Hermitian symmetry broken")
    z = 0.5 * min(p.lambda_plus, p.lambda_minus)
    for zz in (-z, z):
        split = (bgcore.cumulant_onesided(p.alpha_plus, p.lambda_plus, zz)
                 + bgcore.cumulant_onesided(p.alpha_minus, p.lambda_minus, -zz))
        whole = bgcore.cumulant(p, zz)
        _require(abs(split - whole) <= 1e-14 * abs(whole), f"Psi split identity off at z={zz}")
    detail = "cumulant and characteristic function identities hold"
    if p.lambda_plus > 2.0:
        lhs = bgcore.levy_integral(p, lambda x: math.expm1(x) ** 2, rel_tol=1e-12)
        rhs = bgcore.cumulant(p, 2.0) - 2.0 * bgcore.cumulant(p, 1.0)
        _require(abs(lhs - rhs) <= 1e-8 * abs(rhs), f"int (e^x-1)^2 F = {lhs!r} vs {rhs!r}")
    sim = replace(cfg.sim, n_samples=min(cfg.sim.n_samples, 200_000), antithetic=False)
    x = mcoracle.sample_terminal(p, 1.0, sim)
    mean = p.alpha_plus / p.lambda_plus - p.alpha_minus / p.lambda_minus
    var = p.alpha_plus / p.lambda_plus**2 + p.alpha_minus / p.lambda_minus**2
    n = x.size
    _require(abs(x.mean() - mean) < 4 * math.sqrt(var / n), "sample mean off by more than 4 SE")
    k4 = 6 * (p.alpha_plus / p.lambda_plus**4 + p.alpha_minus / p.lambda_minus**4)
    se_var = math.sqrt((k4 + 2 * var**2) / n)
    _require(abs(x.var(ddof=1) - var) < 4 * se_var, "sample variance off by more than 4 SE")
    again = mcoracle.sample_terminal(p, 1.0, replace(sim, workers=4))
    _require(np.array_equal(x, again), "samples depend on the worker count")
    return detail + "; MC moments within 4 SE; sampling deterministic"


def check_growth_condition(cfg: RunConfig) -> str:
    p, m = cfg.model, cfg.market
    if not p.lambda_plus > 1.0:
        raise Skip("Psi(1) is infinite for lambda_plus <= 1")
    psi1 = bgcore.cumulant(p, 1.0)
    closed = p.alpha_plus * math.log(p.lambda_plus / (p.lambda_plus - 1.0)) + p.alpha_minus * math.log(
        p.lambda_minus / (p.lambda_minus + 1.0))
    _require(abs(psi1 - closed) <= 1e-12 * max(abs(closed), 1e-300), "Psi(1) closed forms disagree")
    holds = psi1 >= m.carry
    try:
        measures.solve_memm(p, m, cfg.solver)
        exists = True
    except NoSolutionError:
        exists = False
    return _require(holds == exists,
                    f"Psi(1)={psi1:.10g} vs r-q={m.carry:.6g}: condition {'holds' if holds else 'fails'}, "
                    f"minimal entropy measure {'exists' if exists else 'absent'}")


CHECKS: list[tuple[str, Callable[[RunConfig], str]]] = [
    ("esscher", check_esscher),
    ("memm", check_memm),
    ("bilateral", check_bilateral),
    ("p-optimal", check_p_optimal),
    ("entropy-order", check_entropy_order),
    ("fixed-point", check_fixed_point),
    ("mmm", check_mmm),
    ("price-vs-mc", check_price_vs_mc),
    ("price-vs-mc-mmm", check_price_vs_mc_mmm),
    ("contour-invariance", check_contour_invariance),
    ("put-call-parity", check_parity),
    ("skew", check_skew),
    ("hedge-limits", check_hedge_limits),
    ("properties", check_properties),
    ("growth-condition", check_growth_condition),
]


def run_checks(cfg: RunConfig, report: Optional[Callable[[CheckResult], None]] = None) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            detail = fn(cfg)
            status = "pass"
        except Skip as exc:
            status, detail = "skip", str(exc)
        except Failed as exc:
            status, detail = "fail", str(exc)
        except Exception as exc:  # a crash is a failed check, not a crashed run
            status, detail = "fail", f"{type(exc).__name__}: {exc}"
        res = CheckResult(name, status, detail, time.perf_counter() - start)
        results.append(res)
        if report is not None:
            report(res)
    return results
