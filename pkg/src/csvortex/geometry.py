"""Asymptotically flat cylinders in global isothermal coordinates.

The spatial surface is modelled as the strip ``(t, theta)`` in
``R x [0, 2pi)`` carrying the conformal metric ``g = lam(t, theta) *
(dt^2 + dtheta^2)``.  Two closed-form presets are provided:

* ``neck``      lam = cosh^2 t            (catenoid-like, symmetric neck)
* ``wormhole``  lam = e^{2t} (1 + (m/2) e^{-t})^4   (Einstein-Rosen bridge
  in isotropic form, symmetric under t -> 2 ln(m/2) - t)

as well as ``tabulated`` metrics read from CSV samples.  Both ends of every
admissible metric approach a flat plane exterior: lam / lam_flat stays in
[1/alpha, alpha] for |t| >= t_flat, where lam_flat = C e^{+-2t} is the exact
flat-end conformal factor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Flat-end bound reported as a warning, not an error, for tabulated input.
ALPHA_MAX_DEFAULT = 100.0

# |t| margin used when locating the flat region of the closed-form presets.
_FLAT_MARGIN = 3.0


class GeometryError(ValueError):
    """Invalid metric data or out-of-range evaluation."""


def wrap_angle(delta):
    """Reduce an angle difference to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(delta), TWO_PI)


@dataclass(frozen=True)
class StripPoint:
    """Point on the strip; theta is stored reduced mod 2pi."""

    t: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(np.mod(self.theta, TWO_PI)))
        object.__setattr__(self, "t", float(self.t))


def chart_distance(p: StripPoint, q: StripPoint) -> float:
    """Euclidean distance in the chart with theta wrapped mod 2pi."""
    dth = float(wrap_angle(p.theta - q.theta))
    return math.hypot(p.t - q.t, dth)


@dataclass(frozen=True)
class CylinderMetric:
    """Conformal factor on the strip plus its flat-end bookkeeping.

    ``t_flat`` marks where the end-chart formulas apply and ``alpha`` is the
    measured sup/inf of lam / lam_flat beyond it.  Tabulated presets carry
    their samples and the fitted flat-end scales ``c_plus``/``c_minus``
    (lam_flat = c_plus e^{2t} on the + end, c_minus e^{-2t} on the - end).
    """

    preset: str
    t_flat: float
    alpha: float
    mass: float = 0.0
    t_samples: np.ndarray | None = field(default=None, repr=False)
    theta_samples: np.ndarray | None = field(default=None, repr=False)
    lam_samples: np.ndarray | None = field(default=None, repr=False)
    c_plus: float = 1.0
    c_minus: float = 1.0

    # -- evaluation ---------------------------------------------------------

    def lam(self, t, theta):
        """Conformal factor, vectorized over numpy inputs."""
        t = np.asarray(t, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.preset == "neck":
            out = np.cosh(t) ** 2
            return np.broadcast_to(out, np.broadcast_shapes(t.shape, theta.shape)).copy()
        if self.preset == "wormhole":
            half = 0.5 * self.mass
            out = (np.exp(0.5 * t) + half * np.exp(-0.5 * t)) ** 4
            return np.broadcast_to(out, np.broadcast_shapes(t.shape, theta.shape)).copy()
        if self.preset == "tabulated":
            return self._interp(t, theta)
        raise GeometryError(f"unknown preset {self.preset!r}")

    def _interp(self, t, theta):
        ts = self.t_samples
        ths = self.theta_samples
        vals = self.lam_samples
        t = np.asarray(t, dtype=float)
        theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
        if np.any(t < ts[0] - 1e-12) or np.any(t > ts[-1] + 1e-12):
            raise GeometryError(
                f"tabulated metric covers t in [{ts[0]}, {ts[-1]}], "
                f"requested range [{float(np.min(t))}, {float(np.max(t))}]"
            )
        dt = ts[1] - ts[0]
        dth = ths[1] - ths[0]
        it = np.clip(((t - ts[0]) / dt).astype(int), 0, len(ts) - 2)
        ft = (t - ts[0]) / dt - it
        jt = (theta / dth).astype(int) % len(ths)
        fth = theta / dth - (theta / dth).astype(int)
        j2 = (jt + 1) % len(ths)
        v = (
            vals[it, jt] * (1 - ft) * (1 - fth)
            + vals[it + 1, jt] * ft * (1 - fth)
            + vals[it, j2] * (1 - ft) * fth
            + vals[it + 1, j2] * ft * fth
        )
        return v

    def t_range(self) -> tuple[float, float]:
        if self.preset == "tabulated":
            return float(self.t_samples[0]), float(self.t_samples[-1])
        return (-math.inf, math.inf)


def conformal_factor(metric: CylinderMetric, p: StripPoint) -> float:
    """lam at a single strip point (positive)."""
    return float(metric.lam(p.t, p.theta))


# -- construction -----------------------------------------------------------


def make_metric(
    preset: str,
    *,
    mass: float | None = None,
    t_samples: np.ndarray | None = None,
    theta_samples: np.ndarray | None = None,
    lam_samples: np.ndarray | None = None,
    t_flat: float | None = None,
    alpha_max: float = ALPHA_MAX_DEFAULT,
) -> CylinderMetric:
    """Build a metric, computing t_flat and the flatness bound alpha."""
    preset = preset.lower()
    if preset == "neck":
        tf = _FLAT_MARGIN if t_flat is None else float(t_flat)
        alpha = (1.0 + math.exp(-2.0 * tf)) ** 2
        return CylinderMetric(preset="neck", t_flat=tf, alpha=alpha)

    if preset == "wormhole":
        if mass is None or mass <= 0:
            raise GeometryError("wormhole preset requires mass > 0")
        center = math.log(0.5 * mass)
        # flatness is controlled by |t - center|; the default keeps the end
        # nearer the throat usable for decay windows and reports alpha honestly
        tf = max(2.0, _FLAT_MARGIN - abs(center)) if t_flat is None else float(t_flat)
        ratio_plus = (1.0 + 0.5 * mass * math.exp(-tf)) ** 4
        ratio_minus = (1.0 + (2.0 / mass) * math.exp(-tf)) ** 4
        alpha = max(ratio_plus, ratio_minus)
        return CylinderMetric(preset="wormhole", mass=float(mass), t_flat=tf, alpha=alpha)

    if preset == "tabulated":
        if t_samples is None or theta_samples is None or lam_samples is None:
            raise GeometryError("tabulated preset requires t, theta and lambda samples")
        ts = np.asarray(t_samples, dtype=float)
        ths = np.asarray(theta_samples, dtype=float)
        vals = np.asarray(lam_samples, dtype=float)
        if vals.shape != (len(ts), len(ths)):
            raise GeometryError(
                f"lambda sample shape {vals.shape} does not match "
                f"({len(ts)}, {len(ths)}) grid"
            )
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            bad = int(np.sum(~(vals > 0)))
            raise GeometryError(f"conformal factor must be positive; {bad} bad samples")
        _check_uniform(ts, "t")
        _check_uniform(ths, "theta")
        if abs(ths[0]) > 1e-9 or abs((ths[-1] + (ths[1] - ths[0])) - TWO_PI) > 1e-9:
            raise GeometryError("theta samples must cover [0, 2pi) uniformly, last row omitted")
        tf = min(_FLAT_MARGIN, 0.75 * float(ts[-1])) if t_flat is None else float(t_flat)
        if tf >= ts[-1] or -tf <= ts[0]:
            raise GeometryError("t_flat leaves no flat-end samples on the tabulated grid")
        lam_bar = vals.mean(axis=1)
        c_plus = _fit_flat_scale(ts, lam_bar, tf, end=+1)
        c_minus = _fit_flat_scale(ts, lam_bar, tf, end=-1)
        alpha = _tabulated_alpha(ts, ths, vals, tf, c_plus, c_minus)
        if alpha > alpha_max:
            warnings.warn(
                f"flatness bound alpha = {alpha:.3g} exceeds {alpha_max:g}; "
                "metric ends are far from flat",
                stacklevel=2,
            )
        return CylinderMetric(
            preset="tabulated",
            t_flat=tf,
            alpha=alpha,
            t_samples=ts,
            theta_samples=ths,
            lam_samples=vals,
            c_plus=c_plus,
            c_minus=c_minus,
        )

    raise GeometryError(f"unknown preset {preset!r}")


def _check_uniform(x: np.ndarray, name: str):
    if len(x) < 2:
        raise GeometryError(f"need at least two {name} samples")
    d = np.diff(x)
    if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, abs(d[0])):
        raise GeometryError(f"{name} samples must be strictly increasing and uniform")


def _fit_flat_scale(ts, lam_bar, tf, end):
    """Least-squares scale C of lam_flat = C e^{2|t|-like} on one end."""
    mask = ts >= tf if end > 0 else ts <= -tf
    if not np.any(mask):
        raise GeometryError("no samples beyond t_flat on one end")
    logc = np.log(lam_bar[mask]) - 2.0 * end * ts[mask]
    return float(np.exp(np.mean(logc)))


def _tabulated_alpha(ts, ths, vals, tf, c_plus, c_minus):
    alpha = 1.0
    for end, c in ((+1, c_plus), (-1, c_minus)):
        mask = ts >= tf if end > 0 else ts <= -tf
        lam_flat = c * np.exp(2.0 * end * ts[mask])
        ratio = vals[mask, :] / lam_flat[:, None]
        alpha = max(alpha, float(np.max(ratio)), float(1.0 / np.min(ratio)))
    return alpha


def load_tabulated_csv(path) -> dict:
    """Parse a `t,theta,lambda` CSV (row-major, uniform, theta-periodic)."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 3:
        raise GeometryError("tabulated CSV must have columns t,theta,lambda")
    ts = np.unique(raw[:, 0])
    ths = np.unique(raw[:, 1])
    if len(ts) * len(ths) != raw.shape[0]:
        raise GeometryError("tabulated CSV is not a full tensor grid")
    vals = raw[:, 2].reshape(len(ts), len(ths))
    # verify row-major ordering (t outer, theta inner)
    if not np.allclose(raw[: len(ths), 1], ths):
        raise GeometryError("tabulated CSV must be row-major: theta varies fastest")
    return {"t_samples": ts, "theta_samples": ths, "lam_samples": vals}


# -- end charts -------------------------------------------------------------


def end_radius(metric: CylinderMetric, t) -> np.ndarray | float:
    """Euclidean radius r_e of the flat end chart at axial coordinate t.

    Defined for |t| >= t_flat.  For the closed-form presets this is the
    circumference radius sqrt(lam): cosh t for the neck and
    e^t (1 + (m/2) e^{-t})^2 for the wormhole, covering both ends.
    Tabulated metrics integrate sqrt(theta-averaged lam) outward from the
    fitted flat-end radius at t_flat.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) < metric.t_flat - 1e-12):
        raise GeometryError(f"end chart needs |t| >= t_flat = {metric.t_flat}")
    if metric.preset == "neck":
        out = np.cosh(t_arr)
    elif metric.preset == "wormhole":
        half = 0.5 * metric.mass
        out = (np.exp(0.5 * t_arr) + half * np.exp(-0.5 * t_arr)) ** 2
    elif metric.preset == "tabulated":
        out = _tabulated_end_radius(metric, t_arr)
    else:
        raise GeometryError(f"unknown preset {metric.preset!r}")
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out

def _tabulated_end_radius(metric: CylinderMetric, t_arr):
    ts = metric.t_samples
    lam_bar = metric.lam_samples.mean(axis=1)
    sq = np.sqrt(lam_bar)
    lo, hi = ts[0], ts[-1]
    if np.any(t_arr > hi + 1e-12) or np.any(t_arr < lo - 1e-12):
        raise GeometryError("requested t outside the tabulated range")
    # cumulative trapezoid of sqrt(lam_bar) along the samples
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (sq[1:] + sq[:-1]) * np.diff(ts))])

    def arc(a, b):
        return np.interp(b, ts, cum) - np.interp(a, ts, cum)

    out = np.empty_like(t_arr, dtype=float)
    plus = t_arr >= 0
    r0_plus = math.sqrt(metric.c_plus) * math.exp(metric.t_flat)
    r0_minus = math.sqrt(metric.c_minus) * math.exp(metric.t_flat)
    out[plus] = r0_plus + arc(np.full(np.sum(plus), metric.t_flat), t_arr[plus])
    # the minus end integrates from t down to -t_flat
    out[~plus] = r0_minus + arc(t_arr[~plus], np.full(np.sum(~plus), -metric.t_flat))
    return out
