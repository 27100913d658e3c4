"""Simulation and numerical verification for the anisotropic stable JCIR process.

Set ``AJCIR_BACKEND=numpy`` before import to run without numba.
"""
__version__ = "0.1.0"

from ._backend import BACKEND, set_threads
from .errors import AjcirError, NumericalError, ValidationError
from .model import (CompoundPoisson, CoordinateStable, ExponentialJump, ModelParams,
                    PointMassJump, SampledJump, Spherical, TemperedCoordinate, Truncated,
                    Zero, check_condition_a, immigration_functional, is_subcritical,
                    log_moment_holds, params_from_dict, validate)
from .presets import preset
from .riccati import char_function, closed_form_psi_1d, invariant_char, solve_riccati
from .simulator import mean_formula, simulate_ensemble

__all__ = [
    "BACKEND", "set_threads", "AjcirError", "NumericalError", "ValidationError",
    "CompoundPoisson", "CoordinateStable", "ExponentialJump", "ModelParams",
    "PointMassJump", "SampledJump", "Spherical", "TemperedCoordinate", "Truncated",
    "Zero", "check_condition_a", "immigration_functional", "is_subcritical",
    "log_moment_holds", "params_from_dict", "validate", "preset", "char_function",
    "closed_form_psi_1d", "invariant_char", "solve_riccati", "mean_formula",
    "simulate_ensemble",
]
