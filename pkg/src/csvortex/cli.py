"""Batch command-line interface.

    csvortex solve  config.yaml   solve and dump fields + diagnostics
    csvortex verify config.yaml   solve and run the invariant suite
    csvortex mms    config.yaml   manufactured-solution convergence study
    csvortex decay  config.yaml   exponential tail fits on both ends

Exit codes: 0 success, 1 scientific failure (non-convergence or a failed
invariant), 2 configuration or validation error.  Artifacts are byte-stable:
re-running a command with the same config reproduces identical files, and the
worker-count override (env ``CSVORTEX_WORKERS``) never changes results.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from . import __version__
from .checks import decay_checks, run_invariant_suite
from .config import (
    ConfigError,
    grid_from_config,
    load_config,
    metric_from_config,
    solver_options_from_config,
    vortices_from_config,
)
from .fields import UnitsLedger, fit_decay, reconstruct, total_energy, total_flux
from .geometry import GeometryError
from .grid import GridError, StripGrid, dump_field_csv
from .oracle import NAMED_CASES, OracleError, convergence_study, named_case
from .singular import VortexConfigError
from .solver import DivergedError, build_problem, newton_solve

ORDER_BAND = (1.8, 2.2)

EXIT_OK = 0
EXIT_SCIENTIFIC = 1
EXIT_USAGE = 2


def _info(msg: str):
    print(msg, file=sys.stderr)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _summary_payload(command: str, cfg: dict, results: dict) -> dict:
    return {"command": command, "version": __version__, "config": cfg, "results": results}


def _prepare(cfg):
    metric = metric_from_config(cfg)
    grid = grid_from_config(cfg)
    vortices = vortices_from_config(cfg)
    options = solver_options_from_config(cfg)
    units = UnitsLedger(sign=int(cfg["sign"]))
    problem = build_problem(grid, metric, vortices)
    return metric, grid, options, units, problem


def _dump_solution(out: Path, cfg, problem, solution):
    if cfg["outputs"]["dump_fields"]:
        dump_field_csv(out / "w.csv", problem.grid, solution.w)
        dump_field_csv(out / "u.csv", problem.grid, solution.u)
        dump_field_csv(out / "ubar.csv", problem.grid, problem.ubar)
        _write_json(
            out / "fields_meta.json",
            {
                "T": problem.grid.T,
                "n_t": problem.grid.n_t,
                "n_theta": problem.grid.n_theta,
                "dt": problem.grid.dt,
                "dtheta": problem.grid.dtheta,
                "files": ["w.csv", "u.csv", "ubar.csv"],
                "format": "t,theta,value row-major",
            },
        )
    (out / "newton_log.txt").write_text("\n".join(solution.newton_log) + "\n")


def _decay_payload(rep) -> dict:
    d = dataclasses.asdict(rep)
    for key, val in d.items():
        if isinstance(val, float) and math.isnan(val):
            d[key] = None
    return d


def run_solve(cfg: dict) -> int:
    out = Path(cfg["outputs"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    metric, grid, options, units, problem = _prepare(cfg)
    _info(
        f"solving: {metric.preset} metric, N = {problem.total_vortex_number}, "
        f"grid {grid.n_t}x{grid.n_theta}, T = {grid.T}"
    )
    try:
        solution = newton_solve(problem, options)
    except DivergedError as exc:
        (out / "failed").write_text(f"diverged: {exc}\n")
        _info(f"FAILED: {exc}")
        return EXIT_SCIENTIFIC
    _dump_solution(out, cfg, problem, solution)
    results = {
        "converged": solution.converged,
        "message": solution.message,
        "residual_inf": solution.residual_inf,
        "iterations": solution.iterations,
        "energy_trace": solution.energy_trace,
        "epsilon1": problem.singular.epsilon1,
        "alpha": metric.alpha,
        "t_flat": metric.t_flat,
        "N": problem.total_vortex_number,
    }
    if solution.converged:
        ph = reconstruct(solution, metric, units)
        results["flux"] = total_flux(ph, grid, metric, units)
        results["energy"] = total_energy(ph, grid, metric, units)
        results["decay"] = [
            _decay_payload(fit_decay(solution, metric, end, cfg["decay"]["window"], q))
            for end in ("plus", "minus")
            for q in ("w", "grad_w")
        ]
        _write_json(out / "summary.json", _summary_payload("solve", cfg, results))
        _info(
            f"converged in {solution.iterations} steps, residual {solution.residual_inf:.3e}, "
            f"flux {results['flux']:.6f}, energy {results['energy']:.6f}"
        )
        return EXIT_OK
    _write_json(out / "summary.json", _summary_payload("solve", cfg, results))
    (out / "failed").write_text(solution.message + "\n")
    _info(f"FAILED: {solution.message}")
    return EXIT_SCIENTIFIC


def run_verify(cfg: dict) -> int:
    out = Path(cfg["outputs"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    metric, grid, options, units, problem = _prepare(cfg)
    _info(f"verifying: {metric.preset} metric, N = {problem.total_vortex_number}")
    solution = newton_solve(problem, options)
    checks = run_invariant_suite(
        problem,
        solution,
        units,
        options,
        decay_window=cfg["decay"]["window"],
        min_window_width=cfg["decay"]["min_window_width"],
        check_symmetry=bool(cfg["verify"]["symmetry"]),
        check_richardson=bool(cfg["verify"]["richardson"]),
    )
    payload = [dataclasses.asdict(c) for c in checks]
    all_passed = all(c.passed for c in checks)
    _write_json(out / "report.json", {"all_passed": all_passed, "checks": payload})
    _write_json(
        out / "summary.json",
        _summary_payload("verify", cfg, {"all_passed": all_passed, "checks": payload}),
    )
    for c in checks:
        flag = "SKIP" if c.skipped else ("PASS" if c.passed else "FAIL")
        _info(f"  [{flag}] {c.name}: {c.detail}")
    if not all_passed:
        first = next(c for c in checks if not c.passed)
        _info(f"FAILED invariant: {first.name}")
        return EXIT_SCIENTIFIC
    return EXIT_OK


def run_mms(cfg: dict) -> int:
    out = Path(cfg["outputs"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    case_name = cfg["mms"]["case"]
    if case_name not in NAMED_CASES:
        raise ConfigError(f"unknown manufactured case {case_name!r}; have {sorted(NAMED_CASES)}")
    grids_cfg = cfg["mms"]["grids"]
    if len(grids_cfg) < 3:
        raise ConfigError("mms.grids needs at least 3 grids in a refinement chain")
    metric = metric_from_config(cfg)
    options = solver_options_from_config(cfg)
    T = float(cfg["grid"]["T"])
    grids = [StripGrid(T=T, n_t=int(nt), n_theta=int(nth)) for nt, nth in grids_cfg]
    vortices = vortices_from_config(cfg).snapped(grids[-1])
    base = build_problem(grids[0], metric, vortices, snap=False)
    case = named_case(base, case_name)
    _info(f"mms study: case {case_name}, {len(grids)} grids, T = {T}")
    rows = convergence_study(case, grids, options)
    lines = ["n_t,n_theta,T,max_error,observed_order"]
    for r in rows:
        order = "" if r.observed_order is None else f"{r.observed_order:.17g}"
        lines.append(f"{r.grid.n_t},{r.grid.n_theta},{r.grid.T:.17g},{r.max_error:.17g},{order}")
    (out / "mms_table.csv").write_text("\n".join(lines) + "\n")
    exact = all(r.max_error < 1e-12 for r in rows)
    orders = [r.observed_order for r in rows if r.observed_order is not None]
    in_band = exact or (
        len(orders) == len(rows) - 1
        and all(ORDER_BAND[0] <= p <= ORDER_BAND[1] for p in orders)
    )
    results = {
        "case": case_name,
        "rows": [
            {
                "grid": [r.grid.n_t, r.grid.n_theta],
                "max_error": r.max_error,
                "observed_order": r.observed_order,
            }
            for r in rows
        ],
        "orders_in_band": in_band,
        "band": list(ORDER_BAND),
    }
    _write_json(out / "summary.json", _summary_payload("mms", cfg, results))
    for r in rows:
        _info(
            f"  {r.grid.n_t}x{r.grid.n_theta}: max_error = {r.max_error:.3e}"
            + (f", order = {r.observed_order:.3f}" if r.observed_order is not None else "")
        )
    if not in_band:
        _info(f"FAILED: observed orders outside {ORDER_BAND}")
        return EXIT_SCIENTIFIC
    return EXIT_OK


def run_decay(cfg: dict) -> int:
    out = Path(cfg["outputs"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    metric, grid, options, units, problem = _prepare(cfg)
    if problem.total_vortex_number == 0:
        raise ConfigError("decay fits need at least one vortex")
    solution = newton_solve(problem, options)
    if not solution.converged:
        (out / "failed").write_text(solution.message + "\n")
        _info(f"FAILED: {solution.message}")
        return EXIT_SCIENTIFIC
    checks = decay_checks(
        solution,
        metric,
        problem.total_vortex_number,
        window=cfg["decay"]["window"],
        min_window_width=cfg["decay"]["min_window_width"],
    )
    reports = [
        _decay_payload(fit_decay(solution, metric, end, cfg["decay"]["window"], q))
        for end in ("plus", "minus")
        for q in ("w", "grad_w")
    ]
    _write_json(out / "decay.json", {"fits": reports})
    ok = all(c.passed for c in checks)
    _write_json(
        out / "summary.json",
        _summary_payload(
            "decay",
            cfg,
            {"fits": reports, "checks": [dataclasses.asdict(c) for c in checks], "all_passed": ok},
        ),
    )
    for c in checks:
        _info(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    if not ok:
        first = next(c for c in checks if not c.passed)
        _info(f"FAILED: {first.detail}")
        return EXIT_SCIENTIFIC
    return EXIT_OK


_COMMANDS = {"solve": run_solve, "verify": run_verify, "mms": run_mms, "decay": run_decay}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="csvortex",
        description="Topological Chern-Simons vortices on asymptotically flat cylinders",
    )
    parser.add_argument("--version", action="version", version=f"csvortex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("config", help="YAML run configuration")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg)
    except DivergedError as exc:
        _info(f"solver diverged: {exc}")
        return EXIT_SCIENTIFIC
    except (ConfigError, GeometryError, GridError, VortexConfigError, OracleError, ValueError) as exc:
        _info(f"configuration error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
