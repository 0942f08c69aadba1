"""Adaptive wavelet regression for designs whose density vanishes at a point."""

__version__ = "0.1.0"

from .adapt import (
    ConstantsLedger,
    EstimatorConfig,
    FitResult,
    default_constants,
    estimate_sigma,
    fit,
    fit_integrable,
    fit_two_stage,
    lepski_select,
    oracle_m0,
    xi_set,
)
from .bench import Scenario, TestFunction, catalog, run_monte_carlo, theoretical_exponent
from .coeffs import ThresholdRule, apply_threshold, levels
from .design import DesignDensity, draw, fit_zero, fixed_grid, power_density
from .errors import IrregWaveError
from .wavelet import PeriodizedBasis, build_family, make_basis, project, reconstruct, tabulate
from .zero_affected import assemble_system, build_index_sets, solve_local

__all__ = [
    "ConstantsLedger",
    "DesignDensity",
    "EstimatorConfig",
    "FitResult",
    "IrregWaveError",
    "PeriodizedBasis",
    "Scenario",
    "TestFunction",
    "ThresholdRule",
    "apply_threshold",
    "assemble_system",
    "build_family",
    "build_index_sets",
    "catalog",
    "default_constants",
    "draw",
    "estimate_sigma",
    "fit",
    "fit_integrable",
    "fit_two_stage",
    "fit_zero",
    "fixed_grid",
    "lepski_select",
    "levels",
    "make_basis",
    "oracle_m0",
    "power_density",
    "project",
    "reconstruct",
    "run_monte_carlo",
    "solve_local",
    "tabulate",
    "theoretical_exponent",
    "xi_set",
]
