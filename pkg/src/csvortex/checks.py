"""Invariant suite for converged runs.

Each check returns a named pass/fail with a one-line detail, so the CLI can
emit a machine-readable report and name the first failing invariant.  Sign
checks are noise-floor aware: far-field nodes sit below the solver's
resolution floor, where only roundoff survives, and are required to be
bounded by the floor rather than strictly signed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import (
    DecayReport,
    UnitsLedger,
    fit_decay,
    negativity_summary,
    reconstruct,
    resolution_floor,
    total_energy,
    total_flux,
)
from .geometry import CylinderMetric
from .grid import StripGrid
from .oracle import ThetaShift, symmetry_check
from .singular import VortexConfigError
from .solver import FieldSolution, Problem, SolverOptions, build_problem, newton_solve

FLUX_RTOL = 0.01
ENERGY_RTOL = 0.02
GAP_RTOL = 0.01
SYMMETRY_TOL = 1e-8
RICHARDSON_RTOL = 0.005
DECAY_B_MIN = 0.5
DECAY_R2_MIN = 0.9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    skipped: bool = False


def _result(name, passed, detail, skipped=False):
    return CheckResult(name=name, passed=bool(passed), detail=detail, skipped=skipped)


def run_invariant_suite(
    problem: Problem,
    solution: FieldSolution,
    units: UnitsLedger,
    options: SolverOptions,
    *,
    decay_window=None,
    min_window_width: float = 2.0,
    check_symmetry: bool = True,
    check_richardson: bool = False,
) -> list[CheckResult]:
    grid, metric = problem.grid, problem.metric
    n_total = problem.total_vortex_number
    results: list[CheckResult] = []

    results.append(
        _result(
            "converged",
            solution.converged,
            f"residual_inf = {solution.residual_inf:.3e} ({solution.message})",
        )
    )
    if not solution.converged:
        return results

    neg = negativity_summary(solution)
    results.append(
        _result(
            "negativity",
            neg["resolved_negative"] and neg["noise_bounded"],
            f"max w = {neg['max_w']:.3e}, floor = {neg['floor']:.1e}, "
            f"{neg['resolved_nodes']} resolved nodes all negative = {neg['resolved_negative']}",
        )
    )

    ph = reconstruct(solution, metric, units)
    flux = total_flux(ph, grid, metric, units)
    energy_total = total_energy(ph, grid, metric, units)
    target = 2.0 * math.pi * n_total
    if n_total == 0:
        results.append(_result("flux_quantization", abs(flux) < 1e-10, f"flux = {flux:.3e}"))
        results.append(_result("energy_saturation", abs(energy_total) < 1e-10, f"energy = {energy_total:.3e}"))
    else:
        results.append(
            _result(
                "flux_quantization",
                abs(abs(flux) - target) <= FLUX_RTOL * target,
                f"|flux| = {abs(flux):.6f} vs 2 pi N = {target:.6f} "
                f"({(abs(flux) - target) / target:+.3%})",
            )
        )
        results.append(
            _result(
                "energy_saturation",
                abs(energy_total - target) <= ENERGY_RTOL * target,
                f"energy = {energy_total:.6f} vs 2 pi N = {target:.6f} "
                f"({(energy_total - target) / target:+.3%})",
            )
        )
        results.append(
            _result(
                "energy_flux_consistency",
                abs(energy_total - abs(flux)) <= GAP_RTOL * target,
                f"|energy - |flux|| = {abs(energy_total - abs(flux)):.3e}",
            )
        )

    floor = resolution_floor(solution)
    sgn = float(units.sign)
    f12_viol = float(np.max(sgn * ph.Ftilde12))
    a0_viol = float(np.min(sgn * ph.A0))
    results.append(
        _result(
            "sign_ledger",
            f12_viol <= floor and a0_viol >= -floor,
            f"max sign*F12 = {f12_viol:.3e}, min sign*A0 = {a0_viol:.3e}",
        )
    )
    results.append(
        _result("t00_nonnegative", float(np.min(ph.T00)) >= 0.0, f"min T00 = {float(np.min(ph.T00)):.3e}")
    )
    rows_ok = bool(np.all(ph.phi_sq[0, :] == 1.0) and np.all(ph.phi_sq[-1, :] == 1.0))
    interior = ph.phi_sq[1:-1, :]
    resolved = np.abs(solution.w[1:-1, :]) > floor
    phi_ok = bool(np.all(interior > 0.0) and np.all(interior[resolved] < 1.0))
    results.append(
        _result(
            "higgs_field_range",
            rows_ok and phi_ok,
            f"phi^2 in ({float(np.min(interior)):.3e}, {float(np.max(interior)):.10f}]",
        )
    )

    trace = np.asarray(solution.energy_trace)
    descent_ok = bool(np.all(np.diff(trace) <= 0.0))
    results.append(
        _result(
            "energy_descent",
            descent_ok,
            f"{len(trace)} accepted energies, max uptick = "
            f"{float(np.max(np.diff(trace))) if len(trace) > 1 else 0.0:.3e}",
        )
    )

    results.extend(
        decay_checks(
            solution,
            metric,
            n_total,
            window=decay_window,
            min_window_width=min_window_width,
        )
    )

    if check_symmetry:
        results.append(_symmetry_check(problem, solution, options))
    if check_richardson:
        results.append(_richardson_check(problem, options, flux, n_total))
    return results


def decay_checks(
    solution: FieldSolution,
    metric: CylinderMetric,
    n_total: int,
    *,
    window=None,
    min_window_width: float = 2.0,
) -> list[CheckResult]:
    out: list[CheckResult] = []
    if n_total == 0:
        return [_result("decay_fits", True, "vacuum solution, nothing to fit", skipped=True)]
    grid = solution.grid
    lo, hi = window if window is not None else (metric.t_flat, grid.T - 1.0)
    width = hi - lo
    if width < min_window_width:
        return [
            _result(
                "decay_fits",
                False,
                f"requested window [{lo:.3g}, {hi:.3g}] spans {width:.3g} < "
                f"{min_window_width:g}; domain too short for an asymptotic fit "
                "(increase T)",
            )
        ]
    for end in ("plus", "minus"):
        for quantity in ("w", "grad_w"):
            rep = fit_decay(solution, metric, end, window, quantity)
            name = f"decay_{end}_{quantity}"
            if rep.status == "unresolvable":
                out.append(
                    _result(
                        name,
                        False,
                        f"window [{lo:.3g}, {hi:.3g}] has {rep.n_rows} resolvable rows; "
                        "shrink T or refine (field underflows)",
                    )
                )
                continue
            ok = rep.b_fit > DECAY_B_MIN and rep.r_squared > DECAY_R2_MIN
            out.append(
                _result(
                    name,
                    ok,
                    f"b = {rep.b_fit:.4f}, r^2 = {rep.r_squared:.5f}, "
                    f"rows = {rep.n_rows}, window |t| in [{rep.window[0]:.3g}, {rep.window[1]:.3g}]"
                    + (" (shrunk)" if rep.status == "window-shrunk" else ""),
                )
            )
    return out


def _symmetry_check(problem: Problem, solution: FieldSolution, options: SolverOptions) -> CheckResult:
    metric = problem.metric
    if metric.preset == "tabulated":
        return _result("isometry_equivariance", True, "tabulated metric, no exact isometry", skipped=True)
    grid = problem.grid
    cells = grid.n_theta // 2
    twin = build_problem(
        grid, metric, problem.vortices.rotated(cells * grid.dtheta), snap=False
    )
    twin_sol = newton_solve(twin, options)
    if not twin_sol.converged:
        return _result("isometry_equivariance", False, f"twin solve failed: {twin_sol.message}")
    dev = symmetry_check(solution, twin_sol, ThetaShift(cells))
    return _result(
        "isometry_equivariance",
        dev < SYMMETRY_TOL,
        f"theta shift by {cells} cells, max deviation = {dev:.3e}",
    )


def _richardson_check(problem: Problem, options: SolverOptions, flux: float, n_total: int) -> CheckResult:
    grid = problem.grid
    t_small = grid.T - 2.0
    if t_small <= 1.0:
        return _result("truncation_richardson", True, "domain too short to shrink", skipped=True)
    n_t_small = max(9, int(round((grid.n_t - 1) * t_small / grid.T)) + 1)
    small = StripGrid(T=t_small, n_t=n_t_small, n_theta=grid.n_theta)
    try:
        prob_small = build_problem(small, problem.metric, problem.vortices, snap=False)
    except (VortexConfigError, ValueError) as exc:
        return _result("truncation_richardson", True, f"not comparable: {exc}", skipped=True)
    sol_small = newton_solve(prob_small, options)
    if not sol_small.converged:
        return _result("truncation_richardson", False, f"T-2 solve failed: {sol_small.message}")
    units = UnitsLedger()
    ph = reconstruct(sol_small, problem.metric, units)
    flux_small = total_flux(ph, small, problem.metric, units)
    scale = max(2.0 * math.pi * n_total, 1.0)
    delta = abs(abs(flux_small) - abs(flux)) / scale
    return _result(
        "truncation_richardson",
        delta <= RICHARDSON_RTOL,
        f"|flux(T) - flux(T-2)| / 2 pi N = {delta:.3e}",
    )
