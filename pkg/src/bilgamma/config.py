"""Run configuration files.

The format is INI-like.  Model and market keys sit at the top, before any
section header; optional ``[solver]``, ``[contour]``, ``[sim]``, ``[hedge]`` and
``[surface]`` sections override numerical settings::

    alpha_plus = 1.55
    lambda_plus = 133.96
    alpha_minus = 0.94
    lambda_minus = 88.92
    r = 0
    q = 0
    s0 = 5000

    [sim]
    n_samples = 1000000
    seed = 42

Unknown sections or keys are errors.  ``BILGAMMA_SEED`` in the environment
overrides ``[sim] seed``.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

from .bgcore import BilateralGammaParams, MarketParams
from .errors import BilGammaError, ConfigError
from .hedging import HedgeSettings
from .mcoracle import SimConfig
from .measures import SolverSettings
from .pricer import ContourSettings

__all__ = ["RunConfig", "SurfaceSettings", "load_config", "parse_config", "SEED_ENV"]

SEED_ENV = "BILGAMMA_SEED"
_ROOT = "model"
_MODEL_KEYS = ("alpha_plus", "lambda_plus", "alpha_minus", "lambda_minus")
_MARKET_KEYS = ("r", "q", "s0")


@dataclass(frozen=True)
class RunConfig:
    model: BilateralGammaParams
    market: MarketParams
    solver: SolverSettings = field(default_factory=SolverSettings)
    contour: ContourSettings = field(default_factory=ContourSettings)
    sim: SimConfig = field(default_factory=lambda: SimConfig(n_samples=10**6))
    hedge: HedgeSettings = field(default_factory=HedgeSettings)
    surface: "SurfaceSettings" = field(default_factory=lambda: SurfaceSettings())


@dataclass(frozen=True)
class SurfaceSettings:
    """``time_scale``: model periods per maturity unit (252 for daily parameters, years)."""

    time_scale: float = 1.0

    def __post_init__(self):
        if not self.time_scale > 0:
            raise ConfigError(f"time_scale must be positive, got {self.time_scale}")


def _convert(raw: str, kind: Any, where: str):
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind == _OPT:
            return None if text.lower() in ("", "none", "auto") else float(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {getattr(kind, '__name__', kind)}") from None


_OPT = "optional_float"

_SECTIONS = {
    "solver": (SolverSettings, {"root_tol": float, "quad_rel_tol": float,
                                "max_bracket_expansions": int, "boundary_offset": float}),
    "contour": (ContourSettings, {"nu": _OPT, "abs_tol": float, "rel_tol": float,
                                  "max_truncation": float, "panel_growth": float}),
    "sim": (SimConfig, {"n_samples": int, "seed": int, "antithetic": bool,
                        "chunk_size": int, "workers": int}),
    "hedge": (HedgeSettings, {"quad_rel_tol": float, "tail_cut": float}),
    "surface": (SurfaceSettings, {"time_scale": float}),
}


def _read_section(values: Mapping[str, str], allowed: Mapping[str, Any], name: str) -> dict:
    out = {}
    for key, raw in values.items():
        if key not in allowed:
            raise ConfigError(f"[{name}]: unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
        out[key] = _convert(raw, allowed[key], f"[{name}] {key}")
    return out


def parse_config(text: str, env: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Parse configuration text; ``env`` defaults to ``os.environ``."""
    env = os.environ if env is None else env
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case sensitive
    try:
        parser.read_string(f"[{_ROOT}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None

    for sec in parser.sections():
        if sec != _ROOT and sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")

    root_allowed = {k: float for k in _MODEL_KEYS + _MARKET_KEYS}
    root = _read_section(parser[_ROOT], root_allowed, "top level")
    missing = [k for k in _MODEL_KEYS if k not in root]
    if missing:
        raise ConfigError(f"missing model keys: {', '.join(missing)}")

    try:
        model = BilateralGammaParams(*(root[k] for k in _MODEL_KEYS))
        market = MarketParams(**{k: root[k] for k in _MARKET_KEYS if k in root})
        built = {}
        for name, (cls, allowed) in _SECTIONS.items():
            values = _read_section(parser[name], allowed, name) if parser.has_section(name) else {}
            if name == "sim":
                values.setdefault("n_samples", 10**6)
                if env.get(SEED_ENV):
                    values["seed"] = _convert(env[SEED_ENV], int, SEED_ENV)
            built[name] = cls(**values)
        cfg = RunConfig(model=model, market=market, **built)
        if cfg.hedge.contour != cfg.contour:
            cfg = replace(cfg, hedge=replace(cfg.hedge, contour=cfg.contour))
    except ConfigError:
        raise
    except (BilGammaError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return cfg


def load_config(path: str | os.PathLike, env: Optional[Mapping[str, str]] = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror or exc}") from None
    return parse_config(text, env)
