"""Run configuration: one YAML file per run, validated before any compute.

Layout (all sections optional except ``metric`` unless noted by the
subcommand; defaults shown are what a missing key resolves to):

    metric:   {preset: neck}                      # wormhole needs mass,
                                                  # tabulated needs path
    vortices: [{t: 0.0, theta: 3.14159, multiplicity: 1}, ...]
    grid:     {T: 12.0, n_t: 512, n_theta: 128}
    solver:   {tol_residual_inf: 1e-10, max_newton: 60,
               max_linesearch_halvings: 30, fallback_descent_steps: 200,
               krylov: {tol: 1e-8, max_iter: 2000}}
    sign:     1                                   # Bogomolnyi branch, +-1
    outputs:  {out_dir: out, dump_fields: true}
    decay:    {window: null, min_window_width: 2.0}
    verify:   {symmetry: true, richardson: false}
    mms:      {case: gauss-cos, grids: [[128, 64], [256, 128], [512, 256]]}

The fully resolved mapping (defaults included) is embedded in every emitted
summary, so artifacts carry the complete provenance of their run.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

import yaml

from .geometry import CylinderMetric, load_tabulated_csv, make_metric
from .grid import StripGrid
from .singular import VortexSet, vortex_set


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


_DEFAULTS = {
    "metric": {"preset": "neck"},
    "vortices": [],
    "grid": {"T": 12.0, "n_t": 512, "n_theta": 128},
    "solver": {
        "tol_residual_inf": 1e-10,
        "max_newton": 60,
        "max_linesearch_halvings": 30,
        "fallback_descent_steps": 200,
        "krylov": {"tol": 1e-8, "max_iter": 2000},
    },
    "sign": 1,
    "outputs": {"out_dir": "out", "dump_fields": True},
    "decay": {"window": None, "min_window_width": 2.0},
    "verify": {"symmetry": True, "richardson": False},
    "mms": {"case": "gauss-cos", "grids": [[128, 64], [256, 128], [512, 256]]},
}

_METRIC_KEYS = {"preset", "mass", "path", "t_flat"}


def _merge(defaults, override, path=""):
    if override is None:
        return copy.deepcopy(defaults)
    if isinstance(defaults, dict):
        if not isinstance(override, dict):
            raise ConfigError(f"section {path or 'config'} must be a mapping")
        out = {}
        for key, dval in defaults.items():
            out[key] = _merge(dval, override.get(key), f"{path}.{key}".lstrip("."))
        for key in override:
            if key not in defaults:
                out[key] = copy.deepcopy(override[key])
        return out
    return copy.deepcopy(override)


def load_config(path) -> dict:
    """Read, merge with defaults, and validate a YAML run configuration."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {p}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a mapping")
    unknown = set(raw) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = _merge(_DEFAULTS, raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    m = cfg["metric"]
    unknown = set(m) - _METRIC_KEYS
    if unknown:
        raise ConfigError(f"unknown metric keys: {sorted(unknown)}")
    preset = str(m.get("preset", "")).lower()
    if preset not in ("neck", "wormhole", "tabulated"):
        raise ConfigError(f"metric.preset must be neck, wormhole or tabulated, got {preset!r}")
    if preset == "wormhole":
        mass = m.get("mass")
        if not isinstance(mass, (int, float)) or mass <= 0:
            raise ConfigError("wormhole metric requires mass > 0")
    if preset == "tabulated" and not m.get("path"):
        raise ConfigError("tabulated metric requires a CSV path")

    g = cfg["grid"]
    for key, lo in (("T", 0.0), ("n_t", 9), ("n_theta", 8)):
        if key not in g or not isinstance(g[key], (int, float)) or g[key] < lo:
            raise ConfigError(f"grid.{key} must be a number >= {lo}")
    if int(g["n_theta"]) % 2:
        raise ConfigError("grid.n_theta must be even")

    if not isinstance(cfg["vortices"], list):
        raise ConfigError("vortices must be a list of {t, theta, multiplicity}")
    for i, v in enumerate(cfg["vortices"]):
        if not isinstance(v, dict) or not {"t", "theta", "multiplicity"} <= set(v):
            raise ConfigError(f"vortices[{i}] needs t, theta and multiplicity")
        if not isinstance(v["multiplicity"], int) or v["multiplicity"] < 1:
            raise ConfigError(f"vortices[{i}].multiplicity must be a positive integer")
        if abs(v["t"]) >= g["T"]:
            raise ConfigError(f"vortices[{i}] lies outside the strip |t| < T = {g['T']}")
        for key in ("t", "theta"):
            if not isinstance(v[key], (int, float)) or not math.isfinite(v[key]):
                raise ConfigError(f"vortices[{i}].{key} must be a finite number")

    if cfg["sign"] not in (1, -1):
        raise ConfigError("sign must be +1 or -1")

    s = cfg["solver"]
    for key in ("tol_residual_inf", "max_newton", "max_linesearch_halvings", "fallback_descent_steps"):
        if not isinstance(s[key], (int, float)) or s[key] <= 0:
            raise ConfigError(f"solver.{key} must be positive")
    k = s["krylov"]
    if k["tol"] <= 0 or k["max_iter"] <= 0:
        raise ConfigError("solver.krylov entries must be positive")

    d = cfg["decay"]
    if d["window"] is not None:
        w = d["window"]
        if not (isinstance(w, (list, tuple)) and len(w) == 2 and w[0] < w[1]):
            raise ConfigError("decay.window must be [lo, hi] with lo < hi")

    mm = cfg["mms"]
    grids = mm["grids"]
    if not (isinstance(grids, list) and all(len(gg) == 2 for gg in grids)):
        raise ConfigError("mms.grids must be a list of [n_t, n_theta] pairs")


# -- realization --------------------------------------------------------------


def metric_from_config(cfg: dict) -> CylinderMetric:
    m = cfg["metric"]
    preset = m["preset"].lower()
    if preset == "neck":
        return make_metric("neck", t_flat=m.get("t_flat"))
    if preset == "wormhole":
        return make_metric("wormhole", mass=float(m["mass"]), t_flat=m.get("t_flat"))
    samples = load_tabulated_csv(m["path"])
    return make_metric("tabulated", t_flat=m.get("t_flat"), **samples)


def grid_from_config(cfg: dict) -> StripGrid:
    g = cfg["grid"]
    return StripGrid(T=float(g["T"]), n_t=int(g["n_t"]), n_theta=int(g["n_theta"]))


def vortices_from_config(cfg: dict) -> VortexSet:
    return vortex_set([(v["t"], v["theta"], v["multiplicity"]) for v in cfg["vortices"]])


def solver_options_from_config(cfg: dict):
    from .solver import KrylovOptions, SolverOptions

    s = cfg["solver"]
    return SolverOptions(
        tol_residual_inf=float(s["tol_residual_inf"]),
        max_newton=int(s["max_newton"]),
        max_linesearch_halvings=int(s["max_linesearch_halvings"]),
        krylov=KrylovOptions(tol=float(s["krylov"]["tol"]), max_iter=int(s["krylov"]["max_iter"])),
        fallback_descent_steps=int(s["fallback_descent_steps"]),
    )
