"""Uniform tensor grid on the truncated strip.

Nodes live at t_i = -T + i*dt (i = 0..n_t-1, Dirichlet rows at both ends)
and theta_j = j*dtheta (periodic, the 2pi row is omitted).  Fields are
plain ``(n_t, n_theta)`` float arrays.  The conformal Laplacian is the
5-point chart stencil divided by the conformal factor; quadrature is
trapezoid in t, uniform in theta, weighted by lam.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._reduce import pairwise_sum
from .geometry import TWO_PI, CylinderMetric

GridField = np.ndarray


class GridError(ValueError):
    """Invalid grid parameters or mismatched field shapes."""


@dataclass(frozen=True)
class StripGrid:
    """Truncated strip [-T, T] x [0, 2pi) with uniform spacings."""

    T: float
    n_t: int
    n_theta: int
    dt: float = field(init=False)
    dtheta: float = field(init=False)

    def __post_init__(self):
        if self.T <= 0:
            raise GridError("T must be positive")
        if self.n_t < 9:
            raise GridError("need n_t >= 9")
        if self.n_theta < 8 or self.n_theta % 2 != 0:
            raise GridError("need even n_theta >= 8")
        object.__setattr__(self, "dt", 2.0 * self.T / (self.n_t - 1))
        object.__setattr__(self, "dtheta", TWO_PI / self.n_theta)
        ratio = self.dt / self.dtheta
        if not 0.25 <= ratio <= 4.0:
            warnings.warn(
                f"grid aspect ratio dt/dtheta = {ratio:.3g} outside [1/4, 4]",
                stacklevel=2,
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_t, self.n_theta)

    @property
    def t_nodes(self) -> np.ndarray:
        return -self.T + self.dt * np.arange(self.n_t)

    @property
    def theta_nodes(self) -> np.ndarray:
        return self.dtheta * np.arange(self.n_theta)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.t_nodes, self.theta_nodes, indexing="ij")

    def max_spacing(self) -> float:
        return max(self.dt, self.dtheta)

    def snap_to_cell_center(self, t: float, theta: float) -> tuple[float, float]:
        """Nearest cell center (nodes offset by half a spacing).

        Keeps point singularities off the nodes.
        """
        i = round((t + self.T) / self.dt - 0.5)
        i = min(max(i, 0), self.n_t - 2)
        j = round(theta / self.dtheta - 0.5) % self.n_theta
        return (-self.T + (i + 0.5) * self.dt, (j + 0.5) * self.dtheta)


def check_shape(grid: StripGrid, f: GridField, name: str = "field"):
    if f.shape != grid.shape:
        raise GridError(f"{name} shape {f.shape} does not match grid {grid.shape}")


def sample(grid: StripGrid, sampler) -> GridField:
    """Evaluate a (t, theta) sampler on every node; rejects non-finite values."""
    tm, thm = grid.mesh()
    vals = np.asarray(sampler(tm, thm), dtype=float)
    if vals.shape != grid.shape:
        vals = np.broadcast_to(vals, grid.shape).copy()
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise GridError(
            f"sampler returned non-finite value at node t={tm[tuple(bad)]:.6g}, "
            f"theta={thm[tuple(bad)]:.6g}"
        )
    return vals


def lambda_field(grid: StripGrid, metric: CylinderMetric) -> GridField:
    """Conformal factor sampled on the grid (validated positive)."""
    tm, thm = grid.mesh()
    lam = np.asarray(metric.lam(tm, thm), dtype=float)
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise GridError("conformal factor must be positive and finite on the grid")
    return lam


def chart_laplacian(grid: StripGrid, f: GridField) -> GridField:
    """Flat 5-point Laplacian, periodic in theta, zero on the Dirichlet rows."""
    check_shape(grid, f)
    out = np.zeros_like(f)
    d2t = (f[2:, :] - 2.0 * f[1:-1, :] + f[:-2, :]) / grid.dt**2
    fp = np.roll(f, -1, axis=1)
    fm = np.roll(f, 1, axis=1)
    d2th = (fp[1:-1, :] - 2.0 * f[1:-1, :] + fm[1:-1, :]) / grid.dtheta**2
    out[1:-1, :] = d2t + d2th
    return out


def laplacian_apply(grid: StripGrid, metric: CylinderMetric, f: GridField) -> GridField:
    """Conformal Laplacian lam^{-1} (f_tt + f_thth); second-order accurate."""
    lam = lambda_field(grid, metric)
    out = chart_laplacian(grid, f)
    out[1:-1, :] /= lam[1:-1, :]
    return out


def t_weights(grid: StripGrid) -> np.ndarray:
    w = np.ones(grid.n_t)
    w[0] = w[-1] = 0.5
    return w


def integrate(grid: StripGrid, metric: CylinderMetric, f: GridField) -> float:
    """Metric-weighted quadrature: sum f lam w dt dtheta (trapezoid in t)."""
    check_shape(grid, f)
    lam = lambda_field(grid, metric)
    w = t_weights(grid)
    return pairwise_sum(f * lam * w[:, None]) * grid.dt * grid.dtheta


def integrate_weighted(grid: StripGrid, lam: GridField, f: GridField) -> float:
    """Same quadrature with a pre-sampled conformal factor (solver hot path)."""
    w = t_weights(grid)
    return pairwise_sum(f * lam * w[:, None]) * grid.dt * grid.dtheta


def gradient(grid: StripGrid, f: GridField) -> tuple[GridField, GridField]:
    """Chart gradient (f_t, f_theta), second order.

    Central differences inside, one-sided second-order stencils on the
    Dirichlet rows, periodic wrap in theta.
    """
    check_shape(grid, f)
    ft = np.empty_like(f)
    ft[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2.0 * grid.dt)
    ft[0, :] = (-3.0 * f[0, :] + 4.0 * f[1, :] - f[2, :]) / (2.0 * grid.dt)
    ft[-1, :] = (3.0 * f[-1, :] - 4.0 * f[-2, :] + f[-3, :]) / (2.0 * grid.dt)
    fth = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * grid.dtheta)
    return ft, fth


def dirichlet_energy(grid: StripGrid, f: GridField) -> float:
    """Chart Dirichlet energy sum |grad0 f|^2 dt dtheta (edge-midpoint form).

    Conformally invariant, so no metric weight appears.  Differentiating it
    node-by-node reproduces exactly -2 * chart_laplacian * dt * dtheta at
    interior nodes, which the solver relies on.
    """
    check_shape(grid, f)
    et = (f[1:, :] - f[:-1, :]) / grid.dt
    eth = (np.roll(f, -1, axis=1) - f) / grid.dtheta
    return (pairwise_sum(et * et) + pairwise_sum(eth * eth)) * grid.dt * grid.dtheta


def dump_field_csv(path, grid: StripGrid, f: GridField):
    """Write `t,theta,value` rows (row-major, deterministic formatting)."""
    check_shape(grid, f)
    tm, thm = grid.mesh()
    data = np.column_stack([tm.ravel(), thm.ravel(), f.ravel()])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header="t,theta,value", comments="")


def load_field_csv(path, grid: StripGrid) -> GridField:
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    if raw.shape != (grid.n_t * grid.n_theta, 3):
        raise GridError(f"field file {path} does not match grid {grid.shape}")
    return raw[:, 2].reshape(grid.shape)
