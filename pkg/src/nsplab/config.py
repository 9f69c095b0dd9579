"""Run configuration: schema defaults, YAML/JSON loading, overrides and validation."""

from __future__ import annotations

import copy
import json
import math
import re
from pathlib import Path
from typing import Iterable, Optional

import yaml

from .exceptions import ConfigError

SCHEMA_VERSION = 1
EXPERIMENT_NAMES = ("heat-demo", "linear-decay", "green-bounds", "simulate", "lemma-suite", "symbol-scan")

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "experiment": None,
    "seed": 0,
    "params": {"mu": 1.0, "lam": 0.0, "pressure_law": "linear", "gamma": 5.0 / 3.0},
    "grid": {"n": 64, "L": 32 * math.pi},
    "data": {
        "recipe": "gaussian-grad",
        "delta": 1e-2,
        "s": 0.5,
        "eps": 0.0,
        "width": 0.5,
        "width_radial": 1.0,
        "polarization": "wave",
        "slope": 2.0,
    },
    "integrator": {
        "scheme": "ETD-RK4",
        "dt": 0.4,
        "t_end": None,
        "output_stride": 1,
        "safety": 0.8,
        "nonlinear": True,
    },
    "energy": {"N": 3, "pairs": [[0, 3], [1, 3]], "eps_cross": None},
    "s_list": [0.5, 1.0],
    "ell_list": [0, 1],
    "p_list": [2.0, 1.2],
    "times": {"t_min": 10.0, "t_max": 1000.0, "count": 40},
    "window": [10.0, 1000.0],
    "tolerance": 0.05,
    "green": {"xi_min": 1e-3, "xi_max": 10.0, "xi_count": 40, "t_min": 1e-2, "t_max": 1e4, "t_count": 40,
              "bound": 10.0},
    "symbol": {"r_min": 1e-3, "r_max": 10.0, "count": 200},
    "lemmas": {"n": 32, "L": 2 * math.pi, "count": 16, "slope": 2.0},
}

# per-experiment adjustments to the shared defaults
EXPERIMENT_DEFAULTS = {
    "heat-demo": {"s_list": [0.0, 0.5, 1.0], "ell_list": [0, 1, 2]},
    "simulate": {"s_list": [0.5], "tolerance": 0.05},
}


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads 5e-3 style exponents as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        where = f"{path}{k}"
        if k not in out:
            raise ConfigError({where: "unknown field"})
        if isinstance(out[k], dict) and out[k] is not None:
            if not isinstance(v, dict):
                raise ConfigError({where: "expected a mapping"})
            out[k] = _merge(out[k], v, where + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_file(path) -> dict:
    """Read a YAML/JSON config file, or the ``config`` block of a run manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError({"config": f"cannot read {path}: {exc.strerror}"})
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.load(text, Loader=_Loader)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError({"config": f"cannot parse {path}: {exc}"})
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError({"config": "top level must be a mapping"})
    if "config" in raw and "manifest_version" in raw:
        raw = raw["config"]
    return raw


def parse_override(text: str):
    """'a.b=value' -> (['a', 'b'], parsed value); values parse as YAML scalars/lists."""
    if "=" not in text:
        raise ConfigError({"override": f"expected key=value, got {text!r}"})
    key, value = text.split("=", 1)
    keys = [k for k in key.strip().split(".") if k]
    if not keys:
        raise ConfigError({"override": f"empty key in {text!r}"})
    try:
        parsed = yaml.load(value, Loader=_Loader)
    except yaml.YAMLError:
        parsed = value
    return keys, parsed


def _apply_override(cfg: dict, keys, value) -> None:
    node = cfg
    for i, k in enumerate(keys[:-1]):
        if not isinstance(node, dict) or k not in node or not isinstance(node[k], dict):
            raise ConfigError({".".join(keys[: i + 1]): "unknown section"})
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError({".".join(keys): "unknown field"})
    node[keys[-1]] = value


def resolve(experiment: Optional[str] = None, file_cfg: Optional[dict] = None,
            overrides: Iterable[str] = (), seed: Optional[int] = None) -> dict:
    """Defaults <- experiment defaults <- file <- overrides <- seed; then validate."""
    file_cfg = dict(file_cfg or {})
    name = experiment or file_cfg.get("experiment")
    if name not in EXPERIMENT_NAMES:
        raise ConfigError({"experiment": f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENT_NAMES)}"})
    if file_cfg.get("experiment") not in (None, name):
        raise ConfigError({"experiment": f"config file is for {file_cfg['experiment']!r}, not {name!r}"})
    if "schema_version" in file_cfg and file_cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError({"schema_version": f"unsupported version {file_cfg['schema_version']!r} "
                                             f"(expected {SCHEMA_VERSION})"})
    cfg = _merge(DEFAULTS, EXPERIMENT_DEFAULTS.get(name, {}))
    cfg = _merge(cfg, file_cfg)
    cfg["experiment"] = name
    for text in overrides:
        keys, value = parse_override(text)
        _apply_override(cfg, keys, value)
    if seed is not None:
        cfg["seed"] = int(seed)
    validate(cfg)
    return cfg


def _num(problems, cfg, path, lo=None, hi=None, lo_open=False, integer=False, allow_none=False):
    node = cfg
    for k in path.split("."):
        node = node[k]
    if node is None and allow_none:
        return
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        problems[path] = f"expected a number, got {node!r}"
        return
    if integer and int(node) != node:
        problems[path] = "expected an integer"
        return
    if lo is not None and (node < lo or (lo_open and node == lo)):
        problems[path] = f"must be {'>' if lo_open else '>='} {lo}"
    if hi is not None and node > hi:
        problems[path] = f"must be <= {hi}"


def validate(cfg: dict) -> None:
    """Field-level checks; raises ConfigError listing every problem found."""
    from .data import RECIPES
    from .integrator import _ALIASES

    problems = {}
    _num(problems, cfg, "seed", 0, integer=True)
    _num(problems, cfg, "params.mu", 0, lo_open=True)
    _num(problems, cfg, "params.lam")
    p = cfg["params"]
    if "params.mu" not in problems and "params.lam" not in problems and p["lam"] + 2 * p["mu"] / 3 < 0:
        problems["params.lam"] = "lam + 2 mu / 3 must be >= 0"
    if p["pressure_law"] not in ("linear", "gamma"):
        problems["params.pressure_law"] = "must be 'linear' or 'gamma'"
    _num(problems, cfg, "params.gamma", 1.0)
    _num(problems, cfg, "grid.n", 16, integer=True)
    n = cfg["grid"]["n"]
    if "grid.n" not in problems and (int(n) & (int(n) - 1)):
        problems["grid.n"] = "must be a power of two"
    _num(problems, cfg, "grid.L", 0, lo_open=True)
    d = cfg["data"]
    if d["recipe"] not in RECIPES:
        problems["data.recipe"] = f"must be one of {', '.join(RECIPES)}"
    _num(problems, cfg, "data.delta", 0)
    _num(problems, cfg, "data.s", 0, 1.5)
    if "data.s" not in problems and d["s"] >= 1.5:
        problems["data.s"] = "must be < 3/2"
    _num(problems, cfg, "data.eps", 0)
    _num(problems, cfg, "data.width", 0, lo_open=True)
    _num(problems, cfg, "data.width_radial", 0, lo_open=True)
    if d["polarization"] not in ("wave", "standing"):
        problems["data.polarization"] = "must be 'wave' or 'standing'"
    ic = cfg["integrator"]
    if str(ic["scheme"]).lower() not in _ALIASES:
        problems["integrator.scheme"] = "must be ETD-RK4 or IMEX-CNAB2"
    _num(problems, cfg, "integrator.dt", 0, lo_open=True, allow_none=True)
    _num(problems, cfg, "integrator.t_end", 0, allow_none=True)
    _num(problems, cfg, "integrator.output_stride", 1, integer=True)
    _num(problems, cfg, "integrator.safety", 0, 1, lo_open=True)
    if not isinstance(ic["nonlinear"], bool):
        problems["integrator.nonlinear"] = "must be true or false"
    _num(problems, cfg, "energy.N", 1, integer=True)
    pairs = cfg["energy"]["pairs"]
    if not isinstance(pairs, list) or not all(isinstance(x, list) and len(x) == 2 for x in pairs):
        problems["energy.pairs"] = "must be a list of [l, m] pairs"
    _num(problems, cfg, "energy.eps_cross", 0, allow_none=True)
    for key, lo, hi in (("s_list", 0, 1.5), ("p_list", 1, 2), ("ell_list", 0, None)):
        vals = cfg[key]
        if not isinstance(vals, list) or not vals:
            problems[key] = "must be a nonempty list"
            continue
        for v in vals:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                problems[key] = f"entries must be numbers, got {v!r}"
            elif key == "s_list" and not lo <= v < hi:
                problems[key] = f"entries must lie in [0, 3/2), got {v}"
            elif key == "p_list" and not lo < v <= hi:
                problems[key] = f"entries must lie in (1, 2], got {v}"
            elif key == "ell_list" and (v < 0 or int(v) != v):
                problems[key] = f"entries must be nonnegative integers, got {v}"
    _num(problems, cfg, "times.t_min", 0, lo_open=True)
    _num(problems, cfg, "times.t_max", 0, lo_open=True)
    _num(problems, cfg, "times.count", 2, integer=True)
    w = cfg["window"]
    if not (isinstance(w, list) and len(w) == 2 and all(isinstance(x, (int, float)) for x in w)):
        problems["window"] = "must be [t_lo, t_hi]"
    elif w[0] < 5:
        problems["window"] = "t_lo must be >= 5 (initial transient)"
    elif w[1] <= w[0]:
        problems["window"] = "t_hi must exceed t_lo"
    _num(problems, cfg, "tolerance", 0, lo_open=True)
    for k in ("xi_min", "xi_max", "t_min", "t_max", "bound"):
        _num(problems, cfg, f"green.{k}", 0, lo_open=True)
    _num(problems, cfg, "green.xi_count", 1, integer=True)
    _num(problems, cfg, "green.t_count", 2, integer=True)
    _num(problems, cfg, "symbol.r_min", 0, lo_open=True)
    _num(problems, cfg, "symbol.r_max", 0, lo_open=True)
    _num(problems, cfg, "symbol.count", 1, integer=True)
    _num(problems, cfg, "lemmas.n", 16, integer=True)
    _num(problems, cfg, "lemmas.L", 0, lo_open=True)
    _num(problems, cfg, "lemmas.count", 1, integer=True)
    _num(problems, cfg, "lemmas.slope", 0)
    if problems:
        raise ConfigError(problems)
