"""Damped Newton solver for the split vortex equation.

The unknown is the smooth remainder u in w = ubar + u, which satisfies

    Lap_g u = S e^u (S e^u - 1) + h,      u = 0 at t = +-T,

with S = e^{ubar} and the compactly supported source h.  Stationary points
coincide with those of the energy

    E(u) = int |grad u|^2 + (S e^u - 1)^2 + 2 h u  dV_g,

whose chart Dirichlet term is conformally invariant.  Newton directions come
from a matrix-free BiCGStab on the linearization (indefinite inside vortex
cores, where S e^u < 1/2); a line search accepts a step only if it shrinks
the residual merit ||F||^2 and does not increase E, so the energy trace of a
run is nonincreasing by construction.  Steepest descent on E is kept as a
fallback when Newton stalls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._reduce import dot, norm2, norm_inf
from .geometry import CylinderMetric
from .grid import (
    GridField,
    StripGrid,
    chart_laplacian,
    check_shape,
    dirichlet_energy,
    integrate_weighted,
    lambda_field,
    sample,
)
from .singular import SingularData, VortexSet, build_singular_data

# line search rejects iterates beyond this; converged solutions satisfy
# u <= -ubar, so a large positive u always signals divergence
STEP_GUARD = 50.0
# hard overflow guard for residual evaluation
OVERFLOW_GUARD = 700.0


class DivergedError(RuntimeError):
    """Iterate left the representable range (exp overflow)."""


@dataclass(frozen=True)
class KrylovOptions:
    tol: float = 1e-8
    max_iter: int = 2000

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter <= 0:
            raise ValueError("krylov options must be positive")


@dataclass(frozen=True)
class SolverOptions:
    tol_residual_inf: float = 1e-10
    max_newton: int = 60
    max_linesearch_halvings: int = 30
    krylov: KrylovOptions = field(default_factory=KrylovOptions)
    fallback_descent_steps: int = 200

    def __post_init__(self):
        if min(
            self.tol_residual_inf,
            self.max_newton,
            self.max_linesearch_halvings,
            self.fallback_descent_steps,
        ) <= 0:
            raise ValueError("solver options must be positive")


@dataclass(frozen=True)
class Problem:
    """Grid + metric + precomputed singular data for one vortex set."""

    grid: StripGrid
    metric: CylinderMetric
    vortices: VortexSet
    singular: SingularData
    ubar: GridField
    S: GridField
    h_src: GridField
    lam: GridField
    h_inf: float

    @property
    def total_vortex_number(self) -> int:
        return self.vortices.total


@dataclass
class FieldSolution:
    """Converged (or failed) smooth part plus the reassembled field."""

    u: GridField
    w: GridField
    residual_inf: float
    iterations: int
    energy_trace: list[float]
    grid: StripGrid
    converged: bool
    message: str
    newton_log: list[str]
    problem: "Problem | None" = None
    merit_trace: list[float] | None = None


def build_problem(
    grid: StripGrid,
    metric: CylinderMetric,
    vortices: VortexSet,
    *,
    snap: bool = True,
    annulus_scale: float = 1.0,
) -> Problem:
    """Snap centers off the nodes, build the singular data and sample it."""
    lo, hi = metric.t_range()
    if lo > -grid.T or hi < grid.T:
        raise ValueError(
            f"metric covers t in [{lo}, {hi}] but the grid needs [-{grid.T}, {grid.T}]"
        )
    vs = vortices.snapped(grid) if snap else vortices
    _check_off_node(grid, vs)
    sing = build_singular_data(vs, metric, grid, annulus_scale=annulus_scale)
    lam = lambda_field(grid, metric)
    if vs.total == 0:
        ubar = np.zeros(grid.shape)
        s_field = np.ones(grid.shape)
        h_field = np.zeros(grid.shape)
    else:
        ubar = sample(grid, sing.ubar)
        s_field = sample(grid, sing.S)
        h_field = sample(grid, sing.h_src)
    return Problem(
        grid=grid,
        metric=metric,
        vortices=vs,
        singular=sing,
        ubar=ubar,
        S=s_field,
        h_src=h_field,
        lam=lam,
        h_inf=norm_inf(h_field),
    )


def _check_off_node(grid: StripGrid, vortices: VortexSet):
    floor = min(grid.dt, grid.dtheta) / 8.0
    for p, _ in vortices.centers:
        it = round((p.t + grid.T) / grid.dt)
        jt = round(p.theta / grid.dtheta) % grid.n_theta
        node_t = -grid.T + it * grid.dt
        node_th = jt * grid.dtheta
        d = math.hypot(p.t - node_t, float(np.pi - np.mod(np.pi - (p.theta - node_th), 2 * np.pi)))
        if d < floor:
            raise ValueError(
                f"vortex center ({p.t:.6g}, {p.theta:.6g}) sits on a grid node; "
                "snap it to a cell center"
            )


# -- operator, linearization, energy ---------------------------------------


def residual(problem: Problem, u: GridField) -> GridField:
    """F(u) = Lap_g u - S e^u (S e^u - 1) - h; zero on the Dirichlet rows."""
    check_shape(problem.grid, u)
    if norm_inf(u) > OVERFLOW_GUARD:
        raise DivergedError(f"iterate reached max|u| = {norm_inf(u):.3g} > {OVERFLOW_GUARD}")
    with np.errstate(over="ignore"):
        se = problem.S * np.exp(u)
        out = chart_laplacian(problem.grid, u)
        out[1:-1, :] /= problem.lam[1:-1, :]
        out[1:-1, :] -= (se * (se - 1.0) + problem.h_src)[1:-1, :]
    return out


def jacobian_apply(problem: Problem, u: GridField, v: GridField) -> GridField:
    """Directional derivative of F: Jv = Lap_g v - S e^u (2 S e^u - 1) v."""
    c = _linear_coefficient(problem, u)
    return _apply_linear(problem, c, v)


def _linear_coefficient(problem: Problem, u: GridField) -> GridField:
    with np.errstate(over="ignore"):
        se = problem.S * np.exp(u)
        return se * (2.0 * se - 1.0)


def _apply_linear(problem: Problem, c: GridField, v: GridField) -> GridField:
    out = chart_laplacian(problem.grid, v)
    out[1:-1, :] /= problem.lam[1:-1, :]
    out[1:-1, :] -= (c * v)[1:-1, :]
    return out


def energy(problem: Problem, u: GridField) -> float:
    """Discrete splitting energy; its stationary points satisfy F(u) = 0."""
    check_shape(problem.grid, u)
    with np.errstate(over="ignore"):
        se = problem.S * np.exp(u)
        bulk = (se - 1.0) ** 2 + 2.0 * problem.h_src * u
        return dirichlet_energy(problem.grid, u) + integrate_weighted(
            problem.grid, problem.lam, bulk
        )


# -- Krylov -----------------------------------------------------------------


def _precond_diag(problem: Problem, c: GridField) -> GridField:
    """Jacobi scale |diag J| plus the mean |row entry| of the chart stencil."""
    g = problem.grid
    k2 = 2.0 / g.dt**2 + 2.0 / g.dtheta**2
    diag = -k2 / problem.lam - c
    m = np.abs(diag) + (2.0 * k2 / 5.0) / problem.lam
    m[0, :] = 1.0
    m[-1, :] = 1.0
    return m


def _bicgstab(apply_a, b, minv, tol, max_iter):
    """Right-preconditioned BiCGStab; deterministic reductions throughout.

    Returns (x, iterations, relative residual, breakdown flag).
    """
    bnorm = norm2(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0, False
    x = np.zeros_like(b)
    r = b.copy()
    rhat = b.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    tiny = 1e-300
    for it in range(1, max_iter + 1):
        rho_new = dot(rhat, r)
        if abs(rho_new) < tiny or abs(omega) < tiny:
            return x, it, norm2(r) / bnorm, True
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        phat = minv * p
        v = apply_a(phat)
        denom = dot(rhat, v)
        if abs(denom) < tiny:
            return x, it, norm2(r) / bnorm, True
        alpha = rho_new / denom
        s = r - alpha * v
        if norm2(s) <= tol * bnorm:
            x = x + alpha * phat
            return x, it, norm2(s) / bnorm, False
        shat = minv * s
        t = apply_a(shat)
        tt = dot(t, t)
        if tt < tiny:
            return x, it, norm2(s) / bnorm, True
        omega = dot(t, s) / tt
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        if norm2(r) <= tol * bnorm:
            return x, it, norm2(r) / bnorm, False
        rho = rho_new
    return x, max_iter, norm2(r) / bnorm, False


# -- Newton iteration -------------------------------------------------------


def _log_line(phase, step, rinf, e_val, alpha_used, kry):
    return (
        f"{phase} step={step} residual_inf={rinf:.17g} energy={e_val:.17g} "
        f"alpha={alpha_used:.17g} krylov_iters={kry}"
    )


def _try_step(problem, u, d, merit0, e0, opts):
    """Backtracking accept: merit decrease and no energy increase."""
    alpha = 1.0
    for _ in range(opts.max_linesearch_halvings + 1):
        trial = u + alpha * d
        if norm_inf(trial) <= STEP_GUARD:
            try:
                f_trial = residual(problem, trial)
            except DivergedError:
                f_trial = None
            if f_trial is not None and np.all(np.isfinite(f_trial)):
                merit = dot(f_trial, f_trial)
                e_trial = energy(problem, trial)
                if (
                    merit <= (1.0 - 1e-4 * alpha) * merit0
                    and math.isfinite(e_trial)
                    and e_trial <= e0
                ):
                    return trial, f_trial, merit, e_trial, alpha
        alpha *= 0.5
    return None


def _descent_steps(problem, u, f_cur, merit, e_cur, opts, trace, log, max_steps):
    """Steepest descent on E (direction +F); used when Newton stalls."""
    alpha = 1.0
    made_progress = False
    for k in range(max_steps):
        accepted = None
        a = alpha
        for _ in range(opts.max_linesearch_halvings + 1):
            trial = u + a * f_cur
            if norm_inf(trial) <= STEP_GUARD:
                try:
                    f_trial = residual(problem, trial)
                except DivergedError:
                    f_trial = None
                if f_trial is not None and np.all(np.isfinite(f_trial)):
                    m_trial = dot(f_trial, f_trial)
                    e_trial = energy(problem, trial)
                    if (
                        math.isfinite(e_trial)
                        and e_trial <= e_cur
                        and m_trial <= merit
                        and (e_trial < e_cur or m_trial < merit)
                    ):
                        accepted = (trial, f_trial, m_trial, e_trial, a)
                        break
            a *= 0.5
        if accepted is None:
            break
        u, f_cur, merit, e_cur, a_used = accepted
        made_progress = True
        trace.append(e_cur)
        log.append(_log_line("descent", k + 1, norm_inf(f_cur), e_cur, a_used, 0))
        alpha = min(2.0 * a_used, 1.0)
    return u, f_cur, merit, e_cur, made_progress


def newton_solve(
    problem: Problem,
    options: SolverOptions | None = None,
    init: GridField | None = None,
) -> FieldSolution:
    """Solve the split equation from u = 0 (or ``init``).

    Convergence is declared on ||F||_inf <= tol * (1 + ||h||_inf); iteration
    continues toward the raw tolerance while steps stay productive, so the
    reported residual is usually far below the scaled threshold.
    """
    opts = options or SolverOptions()
    g = problem.grid
    if init is None:
        u = np.zeros(g.shape)
    else:
        check_shape(g, init, "init")
        u = init.astype(float).copy()
        u[0, :] = 0.0
        u[-1, :] = 0.0

    f_cur = residual(problem, u)
    rinf = norm_inf(f_cur)
    merit = dot(f_cur, f_cur)
    e_cur = energy(problem, u)
    trace = [e_cur]
    log = [_log_line("newton", 0, rinf, e_cur, 0.0, 0)]
    scaled_tol = opts.tol_residual_inf * (1.0 + problem.h_inf)

    iters = 0
    fallback_budget = opts.fallback_descent_steps
    stall_retries = 0
    message = "converged"
    while rinf > opts.tol_residual_inf and iters < opts.max_newton:
        coeff = _linear_coefficient(problem, u)
        minv = 1.0 / _precond_diag(problem, coeff)
        d, kry_iters, kry_res, broke = _bicgstab(
            lambda v: _apply_linear(problem, coeff, v),
            -f_cur,
            minv,
            opts.krylov.tol,
            opts.krylov.max_iter,
        )
        step = None
        if np.all(np.isfinite(d)) and norm2(d) > 0.0:
            step = _try_step(problem, u, d, merit, e_cur, opts)
        if step is None:
            # Krylov breakdown or an unusable direction: one descent retry
            if stall_retries >= 2 or fallback_budget <= 0:
                message = (
                    "newton stalled"
                    if not broke
                    else f"krylov breakdown (relres {kry_res:.3g})"
                )
                break
            stall_retries += 1
            u, f_cur, merit, e_cur, progressed = _descent_steps(
                problem, u, f_cur, merit, e_cur, opts, trace, log, fallback_budget
            )
            fallback_budget = 0
            rinf = norm_inf(f_cur)
            if not progressed:
                message = "line search and descent fallback both stalled"
                break
            continue
        u, f_cur, merit, e_cur, alpha_used = step
        prev_rinf = rinf
        rinf = norm_inf(f_cur)
        iters += 1
        trace.append(e_cur)
        log.append(_log_line("newton", iters, rinf, e_cur, alpha_used, kry_iters))
        if rinf <= scaled_tol and rinf > opts.tol_residual_inf and rinf > 0.5 * prev_rinf:
            # scaled criterion met and the raw tolerance is out of reach
            break

    converged = rinf <= scaled_tol
    if not converged and message == "converged":
        message = f"max_newton = {opts.max_newton} exceeded (last residual {rinf:.3g})"
    w = problem.ubar + u
    return FieldSolution(
        u=u,
        w=w,
        residual_inf=rinf,
        iterations=iters,
        energy_trace=trace,
        grid=g,
        converged=converged,
        message=message,
        newton_log=log,
        problem=problem,
    )
