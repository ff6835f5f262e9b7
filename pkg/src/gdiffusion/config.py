"""Experiment configuration: one JSON document per run, flat sections.

Sections (all optional unless an experiment requires them):

    seed            integer default seed
    theta           {"interval": [lo_sq, hi_sq]} or {"generators": [...]}
    coefficients    coefficient section (see gdiffusion.coefficients)
    coefficients_bar  second system for pairwise experiments
    pair_family     {"family": "remark-counterexample"} builds both systems
    x0, y0          initial states
    scenario        {"T", "n_steps", "n_paths", "controls": {...}}
    domain          {"box", "t_grid", "n_samples", "n_refine", "seed"}
    grid            {"bounds", "counts", "T", "n_levels"}
    functions       [{"expr", "monotone", "name"}, ...]
    query           {"t", "x"}
    t_list          times for the generator limit table
    condition(s)    names for the check subcommand
    output          {"dir", "report", "csv", "dump", "csv_stride"}

Validation reports the first offending key by dotted path.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .coefficients import build_coefficients, remark_counterexample_pair
from .conditions import SearchDomain
from .errors import ConfigError
from .expressions import parse_expression
from .functions import TestFunction
from .gfunction import CovarianceSet
from .pde import Grid
from .scenario import VolatilityControl
from .sde import CoefficientSet

SEED_ENV_VAR = "GDIFFUSION_SEED"


def load_config(path: str | None, overrides: list[str] | None = None,
                seed_flag: int | None = None) -> dict:
    """Read the document, apply --set overrides, and resolve the seed.

    Seed precedence: --seed flag, then the environment default, then the
    config value, then 0.
    """
    if path is None:
        cfg = {}
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config document must be a JSON object")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_dotted(cfg, key.strip(), value)
    if seed_flag is not None:
        cfg["seed"] = int(seed_flag)
    elif SEED_ENV_VAR in os.environ:
        try:
            cfg["seed"] = int(os.environ[SEED_ENV_VAR])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc
    elif "seed" not in cfg:
        cfg["seed"] = 0
    return cfg


def _set_dotted(cfg: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set path {dotted!r} crosses a non-object value")
    node[parts[-1]] = value


def require(cfg: dict, key: str, kind=None):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}")
    value = cfg[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{key}: expected {getattr(kind, '__name__', kind)}, "
                          f"got {type(value).__name__}")
    return value


def theta_from_config(section) -> CovarianceSet:
    if not isinstance(section, dict):
        raise ConfigError("theta: expected an object")
    if "interval" in section:
        interval = section["interval"]
        if not (isinstance(interval, (list, tuple)) and len(interval) == 2):
            raise ConfigError("theta.interval: expected [lo_sq, hi_sq]")
        return CovarianceSet.from_interval(float(interval[0]), float(interval[1]))
    if "generators" in section:
        gens = [np.asarray(g, dtype=float) for g in section["generators"]]
        return CovarianceSet(generators=tuple(gens))
    raise ConfigError("theta: expected 'interval' or 'generators'")


def coefficients_from_config(cfg: dict) -> tuple[CoefficientSet, CoefficientSet | None]:
    """The system (and optionally the barred system) named by the config."""
    pair = cfg.get("pair_family")
    if pair is not None:
        family = pair.get("family") if isinstance(pair, dict) else None
        if family == "remark-counterexample":
            theta = theta_from_config(require(cfg, "theta", dict))
            return remark_counterexample_pair(theta.sigma_lower_sq, theta.sigma_upper_sq)
        raise ConfigError(f"pair_family: unknown family {family!r}")
    try:
        main = build_coefficients(require(cfg, "coefficients", dict))
    except ConfigError as exc:
        raise ConfigError(f"coefficients: {exc}") from exc
    bar = None
    if cfg.get("coefficients_bar") is not None:
        try:
            bar = build_coefficients(cfg["coefficients_bar"])
        except ConfigError as exc:
            raise ConfigError(f"coefficients_bar: {exc}") from exc
    return main, bar


def domain_from_config(section, n: int, default_seed: int) -> SearchDomain:
    if not isinstance(section, dict):
        raise ConfigError("domain: expected an object")
    box = np.asarray(require(section, "box", list), dtype=float)
    if box.shape != (n, 2):
        raise ConfigError(f"domain.box: expected {n} rows of [lo, hi]")
    return SearchDomain(
        box=box,
        t_grid=tuple(section.get("t_grid", [0.0])),
        n_samples=int(section.get("n_samples", 512)),
        n_refine=int(section.get("n_refine", 8)),
        seed=int(section.get("seed", default_seed)),
    )


def grid_from_config(section) -> Grid:
    if not isinstance(section, dict):
        raise ConfigError("grid: expected an object")
    bounds = require(section, "bounds", list)
    counts = require(section, "counts", list)
    horizon = float(require(section, "T"))
    n_levels = int(require(section, "n_levels"))
    return Grid.regular(bounds, counts, horizon, n_levels)


def functions_from_config(section, dim: int) -> list[TestFunction]:
    if not isinstance(section, list) or not section:
        raise ConfigError("functions: expected a nonempty list")
    out = []
    for idx, item in enumerate(section):
        if not isinstance(item, dict) or "expr" not in item:
            raise ConfigError(f"functions[{idx}]: expected an object with 'expr'")
        text = item["expr"]
        text = text[5:] if text.startswith("expr:") else text
        expr = parse_expression(text, dim)
        name = item.get("name", f"f{idx}")
        out.append(TestFunction(
            f=lambda x, expr=expr: expr(0.0, x),
            dim=dim,
            monotone=bool(item.get("monotone", False)),
            name=name,
        ))
    return out


def controls_from_config(section, theta: CovarianceSet, n_steps: int,
                         default_seed: int) -> list[VolatilityControl]:
    section = section or {}
    controls: list[VolatilityControl] = []
    if section.get("constants", True):
        controls.extend(VolatilityControl.constant(m, n_steps)
                        for m in range(theta.n_generators))
    k = int(section.get("random_switching", 64))
    seed = int(section.get("seed", default_seed))
    for j in range(k):
        controls.append(VolatilityControl.random_switching(
            theta.n_generators, n_steps, seed * 1000003 + j))
    if section.get("bang_bang", False) and theta.n_generators >= 2:
        controls.append(VolatilityControl.bang_bang_cycle(0, theta.n_generators - 1, n_steps))
    if not controls:
        raise ConfigError("scenario.controls: the control family is empty")
    return controls
