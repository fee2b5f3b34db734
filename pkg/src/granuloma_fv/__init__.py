"""Finite-volume simulation and verification of a four-species granuloma chemotaxis model."""

from .errors import ConfigError, GridShapeError, PositivityError
from .functionals import (
    DiagnosticsRecorder, DiagnosticsRow, combined_mass, dirichlet_quotient,
    dissipation_ledger, energy1, energy2, entropy, mass,
)
from .model import (
    Grid, InitBudget, KineticsF, Params, SigmaSpec, State, f_eval, reaction_rhs,
    sigma_eval, sigma_prime,
)
from .timestepper import StepConfig, StepReport, integrate, stable_dt, step

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "GridShapeError", "PositivityError",
    "DiagnosticsRecorder", "DiagnosticsRow", "combined_mass", "dirichlet_quotient",
    "dissipation_ledger", "energy1", "energy2", "entropy", "mass",
    "Grid", "InitBudget", "KineticsF", "Params", "SigmaSpec", "State", "f_eval",
    "reaction_rhs", "sigma_eval", "sigma_prime",
    "StepConfig", "StepReport", "integrate", "stable_dt", "step",
]
