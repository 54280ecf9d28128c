"""Numerical laboratory for the damped radial nonlinear Klein-Gordon equation

    u_tt + 2 alpha u_t - Lap u + u - f(u) = 0

with power-sum nonlinearities: equilibria, their spectra, time evolution,
trajectory classification and spectral-gap arithmetic.
"""

from .dichotomy import Thresholds, TrajectoryVerdict, build_catalog, classify, convexity_diagnostics
from .functionals import EnergyReport, coercivity_check, dissipation_residual, energy, energy_report, k0
from .grid import FieldPair, RadialGrid, build_grid, laplacian_apply
from .manifold import gamma_roots, gap_condition, lambda_gamma, lipg_bound, manifold_dimensions
from .nonlinearity import NonlinearitySpec, pure_power
from .propagator import LinearFlow, SimulationParams, Trajectory, decay_rate, evolve, linear_multipliers, linear_step, step
from .spectral import (
    a_alpha_spectrum,
    assemble_linearized,
    discrete_spectrum,
    instability_certificate,
    kernel_test,
    observation_bound,
    spectral_report,
)
from .stationary import StationaryProfile, find_stationary, nehari_residual, shoot

__version__ = "0.1.0"

__all__ = [
    "FieldPair",
    "RadialGrid",
    "build_grid",
    "laplacian_apply",
    "NonlinearitySpec",
    "pure_power",
    "EnergyReport",
    "energy",
    "energy_report",
    "k0",
    "coercivity_check",
    "dissipation_residual",
    "LinearFlow",
    "SimulationParams",
    "Trajectory",
    "linear_multipliers",
    "linear_step",
    "step",
    "evolve",
    "decay_rate",
    "StationaryProfile",
    "shoot",
    "find_stationary",
    "nehari_residual",
    "assemble_linearized",
    "discrete_spectrum",
    "kernel_test",
    "a_alpha_spectrum",
    "instability_certificate",
    "observation_bound",
    "spectral_report",
    "Thresholds",
    "TrajectoryVerdict",
    "build_catalog",
    "classify",
    "convexity_diagnostics",
    "gamma_roots",
    "gap_condition",
    "lambda_gamma",
    "lipg_bound",
    "manifold_dimensions",
]
