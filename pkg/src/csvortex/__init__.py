"""Topological Chern-Simons vortex solver on asymptotically flat cylinders."""

from .fields import (
    DecayReport,
    PhysicalFields,
    UnitsLedger,
    fit_decay,
    reconstruct,
    total_energy,
    total_flux,
)
from .geometry import (
    CylinderMetric,
    StripPoint,
    chart_distance,
    conformal_factor,
    end_radius,
    load_tabulated_csv,
    make_metric,
)
from .grid import (
    GridField,
    StripGrid,
    integrate,
    laplacian_apply,
    sample,
)
from .oracle import (
    ManufacturedCase,
    convergence_study,
    manufacture,
    named_case,
    solve_manufactured,
    symmetry_check,
)
from .singular import SingularData, VortexSet, build_singular_data, cutoff_radius, vortex_set
from .solver import (
    FieldSolution,
    KrylovOptions,
    Problem,
    SolverOptions,
    build_problem,
    energy,
    jacobian_apply,
    newton_solve,
    residual,
)

__version__ = "0.1.0"

__all__ = [
    "DecayReport",
    "PhysicalFields",
    "UnitsLedger",
    "fit_decay",
    "reconstruct",
    "total_energy",
    "total_flux",
    "CylinderMetric",
    "StripPoint",
    "chart_distance",
    "conformal_factor",
    "end_radius",
    "load_tabulated_csv",
    "make_metric",
    "GridField",
    "StripGrid",
    "integrate",
    "laplacian_apply",
    "sample",
    "ManufacturedCase",
    "convergence_study",
    "manufacture",
    "named_case",
    "solve_manufactured",
    "symmetry_check",
    "SingularData",
    "VortexSet",
    "build_singular_data",
    "cutoff_radius",
    "vortex_set",
    "FieldSolution",
    "KrylovOptions",
    "Problem",
    "SolverOptions",
    "build_problem",
    "energy",
    "jacobian_apply",
    "newton_solve",
    "residual",
]
