"""Two-level non-Hermitian dynamics along parameter loops around an exceptional point."""

from .asymptotics import (
    delay_time,
    discontinuity,
    fixed_points,
    manifold_series,
    manifold_values,
    maximal_delay,
    numeric_exit,
    predict_delays,
    stitched_solution,
)
from .errors import EPDynamicsError, InvalidConfig, ValidityWarning
from .noise import NoiseConfig, simulate_noisy_ensemble
from .paths import load_config, load_prototype, make_path, prototype_lambda
from .propagator import propagate_populations, propagate_R, propagate_U
from .spectrum import Spectrum, critical_times
from .stokes import compare_with_numeric, exact_R

__version__ = "0.1.0"

__all__ = [
    "EPDynamicsError",
    "InvalidConfig",
    "NoiseConfig",
    "Spectrum",
    "ValidityWarning",
    "compare_with_numeric",
    "critical_times",
    "delay_time",
    "discontinuity",
    "exact_R",
    "fixed_points",
    "load_config",
    "load_prototype",
    "make_path",
    "manifold_series",
    "manifold_values",
    "maximal_delay",
    "numeric_exit",
    "predict_delays",
    "propagate_R",
    "propagate_U",
    "propagate_populations",
    "prototype_lambda",
    "simulate_noisy_ensemble",
    "stitched_solution",
]
