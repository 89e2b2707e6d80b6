"""Physical observables reconstructed from the scalar field w.

With couplings frozen at e = v = 1, kappa = 2 the self-dual relations give

    |phi|^2            = e^w
    Ftilde12           = sign * (1/2) e^w (e^w - 1)
    A0                 = -sign * (1/2) (e^w - 1)
    kinetic            = e^w |grad0 w|^2 / (2 lam)     (spatial covariant term)
    potential_density  = (1/4) e^w (e^w - 1)^2
    electric_density   = A0^2 e^w                       (|D_0 phi|^2, equals the
                                                         potential on-shell)
    T00                = kinetic + potential_density + electric_density

Integrating T00 against dV_g saturates the topological bound: both the total
energy and |total flux| equal 2 pi N up to discretization error.  The far
field of a topological solution obeys the modified-Bessel tail
w ~ -a K_0(r_e), so log-profiles against the end radius fit a slope near -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._reduce import norm_inf
from .geometry import CylinderMetric, end_radius
from .grid import GridField, StripGrid, gradient, integrate, lambda_field
from .solver import FieldSolution

# least-squares windows below this row count are reported, not fitted
MIN_FIT_ROWS = 6


@dataclass(frozen=True)
class UnitsLedger:
    """Frozen coupling choices; kappa = 2 e^2 v^2 is required."""

    e: float = 1.0
    v: float = 1.0
    kappa: float = 2.0
    sign: int = +1

    def __post_init__(self):
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        if abs(self.kappa - 2.0 * self.e**2 * self.v**2) > 1e-12:
            raise ValueError("units require kappa = 2 e^2 v^2")


@dataclass(frozen=True)
class PhysicalFields:
    phi_sq: GridField
    Ftilde12: GridField
    A0: GridField
    kinetic: GridField
    potential_density: GridField
    electric_density: GridField
    T00: GridField


@dataclass(frozen=True)
class DecayReport:
    end: str
    quantity: str
    window: tuple[float, float]
    a_fit: float
    b_fit: float
    r_squared: float
    n_rows: int
    status: str  # "ok" | "window-shrunk" | "unresolvable"


def reconstruct(
    solution: FieldSolution, metric: CylinderMetric, units: UnitsLedger
) -> PhysicalFields:
    """Gauge-invariant observables of a converged solution."""
    if not solution.converged:
        raise ValueError(f"solution did not converge: {solution.message}")
    grid = solution.grid
    w = solution.w
    lam = lambda_field(grid, metric)
    ew = np.exp(w)
    wt, wth = _w_gradient(solution)
    sign = float(units.sign)
    f12 = sign * 0.5 * ew * (ew - 1.0)
    a0 = -sign * 0.5 * (ew - 1.0)
    kinetic = ew * (wt * wt + wth * wth) / (2.0 * lam)
    potential = 0.25 * ew * (ew - 1.0) ** 2
    electric = (units.e * a0) ** 2 * ew
    return PhysicalFields(
        phi_sq=ew,
        Ftilde12=f12,
        A0=a0,
        kinetic=kinetic,
        potential_density=potential,
        electric_density=electric,
        T00=kinetic + potential + electric,
    )


def total_flux(
    fields: PhysicalFields, grid: StripGrid, metric: CylinderMetric, units: UnitsLedger
) -> float:
    """Magnetic flux int Ftilde12 dV_g; magnitude 2 pi N for N vortices."""
    return integrate(grid, metric, fields.Ftilde12)


def total_energy(
    fields: PhysicalFields, grid: StripGrid, metric: CylinderMetric, units: UnitsLedger
) -> float:
    """Total energy int T00 dV_g; saturates at |flux| on self-dual solutions."""
    return integrate(grid, metric, fields.T00)


# -- decay fits --------------------------------------------------------------


def _w_gradient(solution: FieldSolution) -> tuple[GridField, GridField]:
    """Chart gradient of w = ubar + u.

    The singular part has a closed-form gradient, so the stencil only ever
    touches the smooth remainder; this keeps core observables second-order.
    """
    grid = solution.grid
    prob = solution.problem
    if prob is None or prob.total_vortex_number == 0:
        return gradient(grid, solution.w)
    ut, uth = gradient(grid, solution.u)
    tm, thm = grid.mesh()
    gt, gth = prob.singular.grad_ubar(tm, thm)
    return ut + gt, uth + gth


def _profile(solution: FieldSolution, metric: CylinderMetric, quantity: str) -> np.ndarray:
    """Worst-case theta profile max_theta |q| row by row."""
    if quantity == "w":
        return np.max(np.abs(solution.w), axis=1)
    if quantity == "grad_w":
        wt, wth = _w_gradient(solution)
        lam = lambda_field(solution.grid, metric)
        return np.max(np.sqrt((wt * wt + wth * wth) / lam), axis=1)
    raise ValueError(f"quantity must be 'w' or 'grad_w', got {quantity!r}")


def resolution_floor(solution: FieldSolution) -> float:
    """Smallest |w| the solve can certify; below it only signs of noise remain."""
    return max(1e-13, 10.0 * solution.residual_inf, 10.0 * np.finfo(float).eps)


def fit_decay(
    solution: FieldSolution,
    metric: CylinderMetric,
    end: str,
    window: tuple[float, float] | None = None,
    quantity: str = "w",
    floor: float | None = None,
) -> DecayReport:
    """Least-squares fit of ln(max_theta |q|) against r_e over one end.

    The window (in |t|) is clipped to [t_flat, T - 1] and shrunk past any rows
    where the profile falls below the resolution floor; an exhausted window
    yields a report with status ``unresolvable`` instead of a crash.
    """
    if end not in ("plus", "minus"):
        raise ValueError("end must be 'plus' or 'minus'")
    grid = solution.grid
    lo, hi = window if window is not None else (metric.t_flat, grid.T - 1.0)
    lo = max(lo, metric.t_flat)
    hi = min(hi, grid.T - 1.0)
    if floor is None:
        floor = resolution_floor(solution)
    prof = _profile(solution, metric, quantity)
    tn = grid.t_nodes
    s = tn if end == "plus" else -tn
    mask = (s >= lo) & (s <= hi)
    resolved = mask & (prof > floor)
    n = int(np.sum(resolved))
    status = "ok" if np.array_equal(resolved, mask) else "window-shrunk"
    if n < MIN_FIT_ROWS:
        return DecayReport(end, quantity, (lo, hi), math.nan, math.nan, math.nan, n, "unresolvable")
    used_t = np.abs(tn[resolved])
    x = np.asarray(end_radius(metric, used_t if end == "plus" else -used_t))
    y = np.log(prof[resolved])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    return DecayReport(
        end=end,
        quantity=quantity,
        window=(float(np.min(used_t)), float(np.max(used_t))),
        a_fit=float(np.exp(intercept)),
        b_fit=float(-slope),
        r_squared=r2,
        n_rows=n,
        status=status,
    )


def envelope_margin(
    solution: FieldSolution, metric: CylinderMetric, report: DecayReport
) -> float:
    """Largest log-excess of |w| over the fitted envelope a e^{-b r_e}.

    A bound -a' e^{-b r_e} <= w holds on the fit window with
    a' = a_fit * exp(margin); small margins certify the fitted envelope.
    """
    grid = solution.grid
    tn = grid.t_nodes
    s = tn if report.end == "plus" else -tn
    lo, hi = report.window
    mask = (s >= lo) & (s <= hi)
    prof = np.max(np.abs(solution.w), axis=1)[mask]
    r_e = np.asarray(end_radius(metric, tn[mask]))
    log_env = math.log(report.a_fit) - report.b_fit * r_e
    with np.errstate(divide="ignore"):
        excess = np.where(prof > 0, np.log(np.where(prof > 0, prof, 1.0)) - log_env, -np.inf)
    return float(np.max(excess))


def negativity_summary(solution: FieldSolution, vortex_rows_cols=None) -> dict:
    """Sign diagnostics for w away from the Dirichlet rows.

    Interior nodes where |w| exceeds the resolution floor must be strictly
    negative; remaining far-field nodes only carry solver noise and are
    required to stay below the floor.
    """
    w = solution.w[1:-1, :]
    floor = resolution_floor(solution)
    resolved = np.abs(w) > floor
    return {
        "floor": floor,
        "max_w": float(np.max(w)),
        "resolved_nodes": int(np.sum(resolved)),
        "resolved_negative": bool(np.all(w[resolved] < 0.0)) if resolved.any() else True,
        "noise_bounded": bool(np.max(w) <= floor),
    }
