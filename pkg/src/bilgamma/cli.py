"""``bilgamma`` command line.

Exit codes: 0 success, 1 input or numerical failure, 2 the requested
martingale measure does not exist (or the request is not answerable under it).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bgcore import BilateralGammaParams, ConvolvedLaw, TiltedLevy
from .config import RunConfig, load_config
from .errors import BilGammaError, NoSolutionError
from .hedging import hedge_delta
from .measures import MeasureSolution, solve
from .pricer import OptionSpec, lewis_price, vol_surface
from .validation import run_checks

EXIT_OK, EXIT_INPUT, EXIT_NO_SOLUTION = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are input errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


class _NotPriceable(Exception):
    pass


def _g(x: float) -> str:
    return format(float(x), ".12g")


def _law_str(law) -> str:
    if isinstance(law, BilateralGammaParams):
        return str(law)
    if isinstance(law, ConvolvedLaw):
        return " * ".join(str(c) for c in law.components)
    if isinstance(law, TiltedLevy):
        return f"tilted {law.base} theta={_g(law.theta)}"
    return repr(law)


def _grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (inclusive stop)."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if not step > 0:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [start + i * step for i in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use a,b,c or start:stop:step") from None


def _solve(cfg: RunConfig, kind: str) -> MeasureSolution:
    return solve(cfg.model, cfg.market, kind, cfg.solver)


def _priceable(sol: MeasureSolution):
    if isinstance(sol.law, TiltedLevy):
        raise _NotPriceable(
            "options cannot be priced under the minimal entropy measure: its law has "
            "neither a closed-form density nor a closed-form characteristic function"
        )
    return sol.law


def cmd_solve(cfg: RunConfig, args) -> int:
    sol = _solve(cfg, args.kind)
    lines = [f"kind={args.kind}"]
    lines += [f"{k}={_g(v)}" for k, v in sol.params.items()]
    lines.append(f"law={_law_str(sol.law)}")
    if sol.objective is not None:
        name = "p_distance" if sol.pexp is not None else "entropy"
        lines.append(f"{name}={_g(sol.objective)}")
    lines.append(f"martingale_residual={sol.residual:.3e}")
    for k, v in sol.extra.items():
        lines.append(f"{k}={v}")
    print("\n".join(lines))
    return EXIT_OK


def cmd_price(cfg: RunConfig, args) -> int:
    law = _priceable(_solve(cfg, args.kind))
    opt = OptionSpec(args.strike, args.maturity, "put" if args.put else "call")
    price, info = lewis_price(law, cfg.market, opt, cfg.contour, full_output=True)
    print(f"price={_g(price)} kind={opt.kind} strike={_g(opt.strike)} maturity={_g(opt.maturity)} "
          f"nu={_g(info.nu)} truncation={_g(info.truncation)} error_estimate={info.error_estimate:.2e}")
    return EXIT_OK


def cmd_surface(cfg: RunConfig, args) -> int:
    law = _priceable(_solve(cfg, args.kind))
    strikes = args.strikes if args.strikes is not None else [cfg.market.s0 * f for f in
                                                             np.linspace(0.8, 1.2, 9)]
    scale = args.time_scale if args.time_scale is not None else cfg.surface.time_scale
    surf = vol_surface(law, cfg.market, strikes, args.maturities, cfg.contour,
                       workers=args.workers, time_scale=scale)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["maturity", "strike", "price", "implied_vol"])
    for i, t in enumerate(surf.maturities):
        for j, k in enumerate(surf.strikes):
            writer.writerow([_g(t), _g(k), _g(surf.prices[i, j]), _g(surf.implied_vols[i, j])])
    if args.out == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
        print(f"wrote {surf.maturities.size * surf.strikes.size} rows to {args.out}")
    return EXIT_OK


def cmd_hedge(cfg: RunConfig, args) -> int:
    sol = _solve(cfg, "mmm")
    c = sol.params["c"]
    spot = args.spot if args.spot is not None else cfg.market.s0
    opt = OptionSpec(args.strike, args.maturity, "put" if args.put else "call")
    delta = hedge_delta(cfg.model, c, cfg.market, opt, args.t, spot, cfg.hedge)
    print(f"delta={_g(delta)} c={_g(c)} spot={_g(spot)} t={_g(args.t)} "
          f"strike={_g(opt.strike)} maturity={_g(opt.maturity)} kind={opt.kind}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> int:
    failed = 0

    def report(res) -> None:
        nonlocal failed
        failed += res.status == "fail"
        print(f"{res.status.upper():4s}  {res.name:<20s} {res.seconds:8.3f}s  {res.detail}", flush=True)

    results = run_checks(cfg, report)
    counts = {s: sum(r.status == s for r in results) for s in ("pass", "fail", "skip")}
    print(f"{counts['pass']} passed, {counts['fail']} failed, {counts['skip']} skipped")
    return EXIT_INPUT if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bilgamma", description="Bilateral Gamma martingale measures, prices and hedges.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="configuration file")
        return p

    kinds = "esscher, memm, bilateral, p-optimal:<p> or mmm"
    p = add("solve", "solve for a martingale measure")
    p.add_argument("--kind", required=True, help=kinds)
    p.set_defaults(func=cmd_solve)

    p = add("price", "price a European option")
    p.add_argument("--kind", default="bilateral", help=kinds)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--put", action="store_true")
    p.set_defaults(func=cmd_price)

    p = add("surface", "write a price and implied volatility grid as CSV")
    p.add_argument("--kind", default="bilateral", help=kinds)
    p.add_argument("--strikes", type=_grid, default=None, help="default: 0.8 to 1.2 times spot, 9 points")
    p.add_argument("--maturities", type=_grid, default=[0.25, 0.5, 1.0, 2.0])
    p.add_argument("--time-scale", type=float, default=None,
                   help="model periods per maturity unit (overrides [surface] time_scale)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.set_defaults(func=cmd_surface)

    p = add("hedge", "quadratic hedge ratio under the minimal martingale measure")
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--t", type=float, default=0.0, help="current time")
    p.add_argument("--spot", type=float, default=None, help="current spot (default s0)")
    p.add_argument("--put", action="store_true")
    p.set_defaults(func=cmd_hedge)

    p = add("validate", "run the self-check suite")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except NoSolutionError as exc:
        cond = f" [condition violated: {exc.condition}]" if exc.condition else ""
        print(f"no solution: {exc}{cond}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except _NotPriceable as exc:
        print(f"not supported: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except BilGammaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
