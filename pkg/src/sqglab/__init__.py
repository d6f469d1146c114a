"""Critical surface quasi-geostrophic dynamics with symmetric, non-decaying data.

Pseudo-spectral solver on the periodic box, signed O(2) symmetry classes,
ball-average norms, self-similar profiles and their stability.
"""
from .config import ConfigError, RunConfig, parse_config
from .evolve import NumericalError, SolverConfig, Trajectory, run, run_approximate
from .field import Grid, RealField, SpectralField, VectorField, to_real, to_spectral
from .nonlocal_ops import (HomogeneousProfile, fractional_laplacian, poisson_semigroup, riesz,
                           riesz_perp)
from .selfsim import SelfSimConfig, solve_profile, stability_experiment, sweep_amplitude
from .snapshot import read_snapshot, write_snapshot
from .symmetry import SymmetryGroup, act, asymmetry, mean_drift, project_symmetric

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Grid", "HomogeneousProfile", "NumericalError", "RealField", "RunConfig",
    "SelfSimConfig", "SolverConfig", "SpectralField", "SymmetryGroup", "Trajectory", "VectorField",
    "act", "asymmetry", "fractional_laplacian", "mean_drift", "parse_config", "poisson_semigroup",
    "project_symmetric", "read_snapshot", "riesz", "riesz_perp", "run", "run_approximate",
    "solve_profile", "stability_experiment", "sweep_amplitude", "to_real", "to_spectral",
    "write_snapshot",
]
