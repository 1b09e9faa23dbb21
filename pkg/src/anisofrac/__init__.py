"""Numerical laboratory for anisotropic fractional energies.

Spatially varying two-point weights, certified singular quadrature of
the associated nonlocal energies, variational solvers for the nonlocal
and local Dirichlet problems, the s -> 1 and s -> 0 limit sweeps, and
the one-dimensional homogenization experiments showing that averaging
and localization do not commute.
"""

from ._accel import USING_NUMBA, backend_name
from .gridfn import FractionalParams, Grid, GridFunction, gradient_lp, lp_norm
from .kernel import Kernel, builtin, matrix_kernel, symmetrize, verify_hypotheses
from .energy import (
    EnergyReport,
    QuadratureSettings,
    anisotropic_energy,
    bbm_upper_bound_check,
    gagliardo,
    interpolation_check,
)

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA",
    "backend_name",
    "FractionalParams",
    "Grid",
    "GridFunction",
    "gradient_lp",
    "lp_norm",
    "Kernel",
    "builtin",
    "matrix_kernel",
    "symmetrize",
    "verify_hypotheses",
    "EnergyReport",
    "QuadratureSettings",
    "anisotropic_energy",
    "bbm_upper_bound_check",
    "gagliardo",
    "interpolation_check",
    "__version__",
]
