"""Incompressible Navier-Stokes with time-dependent Robin walls on a MAC box grid.

Modules
-------
grid          box geometry, staggered layout, wall enumeration
calculus      mimetic div / grad / curl, averaging, norms, traces
hodge         Leray projection, Hodge Laplacians, resolvents
robin         Robin schedules and the Robin-Stokes operator
evolution     backward-Euler linear evolution and maximal-regularity reports
navier_stokes Picard solver, constants, pressure recovery
io, cli       configuration, file formats, command line
"""

from .calculus import curl_ef, curl_fe, div, grad, inner, norm_H, norm_V
from .evolution import Trajectory, duhamel_residual, estimate_CMR, linf_V_report, max_reg_report, solve_linear
from .fields import random_forcing, random_smooth_field, taylor_green
from .grid import AxisKind, BoxGrid, beta_from_friction, build_grid, weingarten
from .hodge import SolverError, commutator_residual, hodge_laplacian_apply, project, resolvent
from .io import __version__
from .navier_stokes import (PicardDivergence, bernoulli_pressure, bilinear_solve, estimate_constants,
                            nonlinear_rhs, picard_solve, pressure_recover, rns_residual)
from .robin import BetaSchedule, RobinStokesOperator, ScheduleError, beta_validate

__all__ = [
    "AxisKind", "BoxGrid", "build_grid", "weingarten", "beta_from_friction",
    "div", "grad", "curl_ef", "curl_fe", "inner", "norm_H", "norm_V",
    "project", "resolvent", "hodge_laplacian_apply", "commutator_residual", "SolverError",
    "BetaSchedule", "RobinStokesOperator", "ScheduleError", "beta_validate",
    "Trajectory", "solve_linear", "max_reg_report", "linf_V_report", "duhamel_residual", "estimate_CMR",
    "nonlinear_rhs", "bilinear_solve", "picard_solve", "estimate_constants", "pressure_recover",
    "bernoulli_pressure", "rns_residual", "PicardDivergence",
    "taylor_green", "random_smooth_field", "random_forcing",
    "__version__",
]
