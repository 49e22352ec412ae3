"""Root finding, 1-D minimisation and half-line quadrature kernels.

These wrap scipy's Brent root finder, golden-section search and QUADPACK
behind the bracketing policies the solvers need: open intervals whose
objective blows up at the edges, and one-sided intervals unbounded below.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError

_EPS = np.finfo(float).eps


# a lower end this far below the upper one is searched as if it were -inf
_FAR = 1e6


def _is_far(lo: float, hi: float) -> bool:
    return not math.isfinite(lo) or hi - lo > _FAR * max(1.0, abs(hi))


def _safe(fn: Callable[[float], float], x: float) -> float:
    try:
        v = float(fn(x))
    except (ValueError, OverflowError, ZeroDivisionError, ArithmeticError):
        return math.nan
    return v


def solve_increasing(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float = 1e-12,
    boundary_offset: float = 1e-9,
    max_expansions: int = 200,
) -> float:
    """Root of a strictly increasing ``fn`` on the open interval ``(lo, hi)``.

    ``lo`` may be ``-inf`` (or astronomically far below ``hi``); the left end
    of the bracket then grows geometrically.  Finite ends start at ``boundary_offset * width`` from the
    edge and move closer by factors of 1e-3 until the sign changes.
    """
    if not lo < hi:
        raise ValueError(f"empty interval ({lo}, {hi})")

    far = _is_far(lo, hi)
    width = max(1.0, abs(hi)) if far else hi - lo
    off = boundary_offset * width

    # right end: need fn(b) > 0
    b = hi - off
    fb = _safe(fn, b)
    step = off
    for _ in range(max_expansions):
        if fb > 0 or fb == math.inf:
            break
        if not math.isnan(fb) and fb == 0.0:
            return b
        step *= 1e-3
        nb = hi - step
        if nb <= b or step < 4 * _EPS * max(1.0, abs(hi)):
            raise ConvergenceError(f"no sign change near upper end {hi}")
        b, fb = nb, _safe(fn, nb)
    else:
        raise ConvergenceError(f"no sign change near upper end {hi}")

    # left end: need fn(a) < 0
    if not far:
        a = lo + off
        fa = _safe(fn, a)
        step = off
        for _ in range(max_expansions):
            if fa < 0 or fa == -math.inf:
                break
            if fa == 0.0:
                return a
            step *= 1e-3
            na = lo + step
            if na >= a or step < 4 * _EPS * max(1.0, abs(lo)):
                raise ConvergenceError(f"no sign change near lower end {lo}")
            a, fa = na, _safe(fn, na)
        else:
            raise ConvergenceError(f"no sign change near lower end {lo}")
    else:
        dist = 1.0
        a = b - dist
        fa = _safe(fn, a)
        for _ in range(max_expansions):
            if fa < 0 or fa == -math.inf:
                break
            if fa == 0.0:
                return a
            dist *= 2.0
            a = max(b - dist, 0.5 * (lo + a)) if math.isfinite(lo) else b - dist
            fa = _safe(fn, a)
        else:
            raise ConvergenceError("no sign change while expanding towards -inf")

    def g(x: float) -> float:
        v = _safe(fn, x)
        if math.isnan(v):
            raise ConvergenceError(f"objective undefined at {x}")
        return v

    if math.isinf(fa) or math.isinf(fb):
        # bisect the infinite end inwards until finite; keeps brentq happy
        while math.isinf(fa):
            m = 0.5 * (a + b)
            fm = g(m)
            if fm < 0:
                a, fa = m, fm
            else:
                b, fb = m, fm
        while math.isinf(fb):
            m = 0.5 * (a + b)
            fm = g(m)
            if fm > 0:
                b, fb = m, fm
            else:
                a, fa = m, fm
    return optimize.brentq(g, a, b, xtol=xtol, rtol=4 * _EPS, maxiter=500)


def minimize_open_interval(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float = 1e-10,
    boundary_offset: float = 1e-9,
    max_expansions: int = 200,
) -> tuple[float, float]:
    """Minimise ``fn`` on ``(lo, hi)`` given that it tends to +inf at both ends.

    An expanding search locates a bracketing triple, then golden-section
    search refines it.  Returns ``(x, fn(x))``.
    """
    if not lo < hi:
        raise ValueError(f"empty interval ({lo}, {hi})")

    def val(x: float) -> float:
        v = _safe(fn, x)
        return math.inf if math.isnan(v) else v

    far = _is_far(lo, hi)
    if not far:
        width = hi - lo
        xs = [lo + width * t for t in (0.25, 0.5, 0.75)]
    else:
        width = max(1.0, abs(hi))
        xs = [hi - 4.0 * width, hi - 2.0 * width, hi - width]
    min_gap = boundary_offset * width
    fs = [val(x) for x in xs]

    for _ in range(max_expansions):
        # argmin takes the first minimiser, so fs[j - 1] > fs[j] whenever j > 0
        j = int(np.argmin(fs))
        if 0 < j < len(xs) - 1 and fs[j] < fs[j + 1]:
            break
        if j == 0:
            if not far:
                if xs[0] - lo < min_gap:
                    raise ConvergenceError("minimum runs into the lower boundary")
                new = lo + 0.5 * (xs[0] - lo)
            else:
                new = hi - 2.0 * (hi - xs[0])
                if math.isfinite(lo) and new <= lo:
                    if xs[0] - lo < min_gap * max(1.0, abs(lo)):
                        raise ConvergenceError("minimum runs into the lower boundary")
                    new = lo + 0.5 * (xs[0] - lo)
            xs.insert(0, new)
            fs.insert(0, val(new))
        elif j == len(xs) - 1:
            if hi - xs[-1] < min_gap:
                raise ConvergenceError("minimum runs into the upper boundary")
            new = hi - 0.5 * (hi - xs[-1])
            xs.append(new)
            fs.append(val(new))
        else:
            # tie with the right neighbour: refine between them
            new = 0.5 * (xs[j] + xs[j + 1])
            xs.insert(j + 1, new)
            fs.insert(j + 1, val(new))
    else:
        raise ConvergenceError("no bracketing triple found")

    a, b, c = xs[j - 1], xs[j], xs[j + 1]
    rel = xtol / max(abs(b), 1.0)
    res = optimize.minimize_scalar(val, bracket=(a, b, c), method="golden", tol=rel)
    x = float(res.x)
    return x, val(x)


def quad(f: Callable[[float], float], a: float, b: float, *, rel_tol: float,
         abs_tol: float = 0.0, limit: int = 200) -> tuple[float, float]:
    """QUADPACK ``qags`` with warnings promoted to :class:`ConvergenceError`."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=limit)
        except integrate.IntegrationWarning as exc:
            # retry silently; accept the estimate if the error is still tiny
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.quad(f, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=limit)
            if err > max(abs_tol, 100 * rel_tol * abs(val)):
                raise ConvergenceError(f"quadrature on [{a}, {b}] failed: {exc}") from exc
    return val, err


def half_line_quad(
    f: Callable[[float], float],
    *,
    rel_tol: float = 1e-10,
    split: float = 1.0,
    tail_rel: float = 1e-16,
    max_end: float = 1e5,
) -> float:
    """Integrate ``f`` over ``(0, inf)``.

    ``[0, split]`` is done in one adaptive pass; beyond it panels of doubling
    length are added until a panel contributes less than ``tail_rel`` of the
    running total.  ``f`` must be finite on ``(0, inf)``.
    """
    total, _ = quad(f, 0.0, split, rel_tol=rel_tol)
    a, b = split, 2.0 * split
    while True:
        part, _ = quad(f, a, b, rel_tol=rel_tol)
        total += part
        if abs(part) <= tail_rel * abs(total) or (part == 0.0 and total == 0.0):
            return total
        if b >= max_end:
            raise ConvergenceError(f"tail of half-line integral not negligible at x={b}")
        a, b = b, 2.0 * b
