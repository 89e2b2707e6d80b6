"""Singular part of the vortex field.

Each vortex center p_k of multiplicity m_k contributes

    psi_k(rho) = 2 m_k eta(rho / eps1) ln(rho / eps1),

where rho is the theta-wrapped chart distance to p_k and eta is a C^3
smoothstep equal to 1 for s <= 1/2 and 0 for s >= 1.  Inside the half-disc
the contribution is exactly the chart logarithm, so the flat Laplacian of
ubar = sum_k psi_k carries 4 pi m_k delta_{p_k} exactly (the conformal
factor cancels against the metric delta).  The leftover smooth source

    h = -lam^{-1} sum_k (psi_k'' + psi_k'/rho)

is supported on the annuli eps1/2 <= rho <= eps1 and is evaluated in
closed form from the smoothstep derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CylinderMetric, StripPoint, chart_distance, wrap_angle
from .grid import StripGrid

# eps1 is capped by the chart-embedding bound (< pi/2, so wrapped discs
# never self-overlap) and by an absolute unit cap.
EPS1_CAP_ABS = 1.0
EPS1_CAP_WRAP = math.pi / 4.0
# discs must clear the Dirichlet rows and be resolvable
BOUNDARY_FRACTION = 0.25
MIN_CELLS_PER_EPS1 = 4.0


class VortexConfigError(ValueError):
    """Inadmissible vortex placement for the requested grid."""


@dataclass(frozen=True)
class VortexSet:
    """Prescribed centers with multiplicities; coincident centers merged."""

    centers: tuple[tuple[StripPoint, int], ...]

    def __post_init__(self):
        merged: list[tuple[StripPoint, int]] = []
        for p, m in self.centers:
            if m < 1 or m != int(m):
                raise VortexConfigError(f"multiplicity must be a positive integer, got {m}")
            for idx, (q, mq) in enumerate(merged):
                if chart_distance(p, q) == 0.0:
                    merged[idx] = (q, mq + int(m))
                    break
            else:
                merged.append((p, int(m)))
        object.__setattr__(self, "centers", tuple(merged))

    @property
    def total(self) -> int:
        """Total vortex number N = sum of multiplicities."""
        return sum(m for _, m in self.centers)

    def snapped(self, grid: StripGrid) -> "VortexSet":
        """Centers moved to the nearest cell centers of ``grid``."""
        moved = tuple(
            (StripPoint(*grid.snap_to_cell_center(p.t, p.theta)), m) for p, m in self.centers
        )
        return VortexSet(moved)

    def rotated(self, dtheta: float) -> "VortexSet":
        return VortexSet(tuple((StripPoint(p.t, p.theta + dtheta), m) for p, m in self.centers))

    def t_reflected(self, center: float = 0.0) -> "VortexSet":
        return VortexSet(
            tuple((StripPoint(2.0 * center - p.t, p.theta), m) for p, m in self.centers)
        )


def vortex_set(entries) -> VortexSet:
    """Build a VortexSet from (t, theta, multiplicity) triples."""
    return VortexSet(tuple((StripPoint(t, th), int(m)) for t, th, m in entries))


# -- C^3 smoothstep ---------------------------------------------------------
#
# eta(s) = S3(2(1-s)) on [1/2, 1] with the degree-7 smoothstep
# S3(x) = 35x^4 - 84x^5 + 70x^6 - 20x^7; first three derivatives vanish at
# both seams, so h is C^1 and second-order stencils see a smooth source.


def _s3(x):
    return x**4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)))


def _s3p(x):
    return x**3 * (140.0 + x * (-420.0 + x * (420.0 - 140.0 * x)))


def _s3pp(x):
    return x**2 * (420.0 + x * (-1680.0 + x * (2100.0 - 840.0 * x)))


def eta(s):
    s = np.asarray(s, dtype=float)
    x = np.clip(2.0 * (1.0 - s), 0.0, 1.0)
    return np.where(s <= 0.5, 1.0, np.where(s >= 1.0, 0.0, _s3(x)))


def eta_prime(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0.5) & (s < 1.0)
    x = np.clip(2.0 * (1.0 - s), 0.0, 1.0)
    return np.where(inside, -2.0 * _s3p(x), 0.0)


def eta_second(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0.5) & (s < 1.0)
    x = np.clip(2.0 * (1.0 - s), 0.0, 1.0)
    return np.where(inside, 4.0 * _s3pp(x), 0.0)


# -- cutoff radius ----------------------------------------------------------


def cutoff_radius(vortices: VortexSet, grid: StripGrid) -> float:
    """Disc radius eps1 = min(1, pi/4, pairwise/4, boundary clearance/4).

    Rejects placements the grid cannot resolve (eps1 < 4 max spacing) and
    vortices too close to the truncation rows.
    """
    eps = min(EPS1_CAP_ABS, EPS1_CAP_WRAP)
    pts = vortices.centers
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            eps = min(eps, chart_distance(pts[i][0], pts[j][0]) / 4.0)
    for p, _ in pts:
        eps = min(eps, (grid.T - abs(p.t)) / 4.0)
    floor = MIN_CELLS_PER_EPS1 * grid.max_spacing()
    if eps + 1e-12 < floor:
        raise VortexConfigError(
            f"cutoff radius eps1 = {eps:.4g} is below {MIN_CELLS_PER_EPS1:g} grid "
            f"spacings ({floor:.4g}); move vortices away from t = +-T or refine "
            f"the grid to spacing <= {eps / MIN_CELLS_PER_EPS1:.4g}"
        )
    return eps


# -- samplers ---------------------------------------------------------------


@dataclass(frozen=True)
class SingularData:
    """Cutoff radius plus the ubar / S / h samplers for one vortex set."""

    epsilon1: float
    vortices: VortexSet
    metric: CylinderMetric

    def _rho(self, t, theta, p: StripPoint):
        dt = np.asarray(t, dtype=float) - p.t
        dth = wrap_angle(np.asarray(theta, dtype=float) - p.theta)
        return np.hypot(dt, dth)

    def ubar(self, t, theta):
        """sum_k 2 m_k eta(rho/eps1) ln(rho/eps1); -inf at the centers."""
        out = np.zeros(np.broadcast_shapes(np.shape(t), np.shape(theta)))
        for p, m in self.vortices.centers:
            s = self._rho(t, theta, p) / self.epsilon1
            with np.errstate(divide="ignore"):
                logs = np.log(np.where(s > 0, s, 1.0))
                logs = np.where(s > 0, logs, -np.inf)
            out = out + np.where(s < 1.0, 2.0 * m * eta(s) * logs, 0.0)
        return out

    def S(self, t, theta):
        """e^{ubar} in (0, 1]; exactly 1 outside all discs."""
        return np.exp(self.ubar(t, theta))

    def grad_ubar(self, t, theta):
        """Exact chart gradient (d_t ubar, d_theta ubar); singular at centers.

        Postprocessing adds this to the finite-differenced gradient of the
        smooth part so no stencil ever straddles the logarithmic cores.
        """
        shape = np.broadcast_shapes(np.shape(t), np.shape(theta))
        gt = np.zeros(shape)
        gth = np.zeros(shape)
        eps = self.epsilon1
        for p, m in self.vortices.centers:
            dt = np.asarray(t, dtype=float) - p.t
            dth = wrap_angle(np.asarray(theta, dtype=float) - p.theta)
            rho = np.hypot(dt, dth)
            s = rho / eps
            on = (s > 0) & (s < 1.0)
            safe = np.where(on, rho, 1.0)
            L = np.log(np.where(on, s, 1.0))
            # psi'(rho) = 2m [eta' L / eps + eta / rho]
            dpsi = 2.0 * m * (eta_prime(s) * L / eps + eta(s) / safe)
            gt = gt + np.where(on, dpsi * dt / safe, 0.0)
            gth = gth + np.where(on, dpsi * dth / safe, 0.0)
        return gt, gth

    def h_src(self, t, theta):
        """Closed-form smooth source, supported on the annuli.

        h = -lam^{-1} sum_k 2 m_k [eta'' L / eps^2 + eta' (2 + L) / (eps rho)]
        with L = ln(rho/eps); identically zero for rho <= eps/2 (the pure log
        is chart-harmonic there) and rho >= eps.
        """
        lam = self.metric.lam(t, theta)
        out = np.zeros(np.broadcast_shapes(np.shape(t), np.shape(theta)))
        eps = self.epsilon1
        for p, m in self.vortices.centers:
            rho = self._rho(t, theta, p)
            s = rho / eps
            on = (s > 0.5) & (s < 1.0)
            safe_rho = np.where(on, rho, 1.0)
            L = np.log(np.where(on, s, 1.0))
            lap = 2.0 * m * (
                eta_second(s) * L / eps**2 + eta_prime(s) * (2.0 + L) / (eps * safe_rho)
            )
            out = out + np.where(on, lap, 0.0)
        return -out / lam


def build_singular_data(
    vortices: VortexSet,
    metric: CylinderMetric,
    grid: StripGrid,
    *,
    annulus_scale: float = 1.0,
) -> SingularData:
    """Compute eps1 for the (already snapped) vortex set and bundle samplers.

    ``annulus_scale`` shrinks eps1 to exercise representation independence of
    the reassembled field; it must keep the discs resolvable.
    """
    if vortices.total == 0:
        return SingularData(epsilon1=EPS1_CAP_WRAP, vortices=vortices, metric=metric)
    eps = cutoff_radius(vortices, grid)
    if annulus_scale != 1.0:
        if not 0.0 < annulus_scale <= 1.0:
            raise VortexConfigError("annulus_scale must be in (0, 1]")
        eps = eps * annulus_scale
        floor = MIN_CELLS_PER_EPS1 * grid.max_spacing()
        if eps + 1e-12 < floor:
            raise VortexConfigError(
                f"scaled cutoff radius {eps:.4g} is no longer resolvable (< {floor:.4g})"
            )
    return SingularData(epsilon1=eps, vortices=vortices, metric=metric)
