"""Pseudo-spectral fractional Navier-Stokes-Voigt / Euler-Voigt solver on the 3D torus."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    FormatError,
    FvgtError,
    InstabilityError,
    StudyError,
)
from .spectral import (
    APower,
    FractionalHelmholtz,
    HelmholtzInverse,
    SpectralField,
    WaveGrid,
    apply_multiplier,
    inner_product,
    leray_project,
    sobolev_norm,
    truncate,
    wavenumber_grid,
)
from .nonlinear import DealiasRule, bilinear_term, trilinear_form
from .solver import SimState, SolverParams, initial_condition, rhs, run, step_rk4
from .diagnostics import EnergyReport, energy_balance_residual, energy_report

__all__ = [
    "APower",
    "ConfigurationError",
    "DealiasRule",
    "EnergyReport",
    "FormatError",
    "FractionalHelmholtz",
    "FvgtError",
    "HelmholtzInverse",
    "InstabilityError",
    "SimState",
    "SolverParams",
    "SpectralField",
    "StudyError",
    "WaveGrid",
    "apply_multiplier",
    "bilinear_term",
    "energy_balance_residual",
    "energy_report",
    "initial_condition",
    "inner_product",
    "leray_project",
    "rhs",
    "run",
    "sobolev_norm",
    "step_rk4",
    "trilinear_form",
    "truncate",
    "wavenumber_grid",
]
