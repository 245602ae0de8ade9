"""Spectra, transmission, entanglement and fits for chains of coupled
lumped-element resonators hosting spin ensembles."""

from .core import (
    KB_OVER_H,
    MU_B_OVER_H,
    ChipConfig,
    ConfigError,
    DegenerateInputError,
    FitError,
    GridTooLargeError,
    LerParams,
    NumericalError,
    ResonanceError,
    SingularResponseError,
    SpinEnsembleParams,
    TrackingError,
    load_config,
    spin_frequency,
    thermal_coupling,
    validate_config,
)
from .spectrum import build_hamiltonian, eigensolve, normal_modes, polariton_angle, solve, track_branches
from .transmission import s21_closed_pair, s21_general, s21_single, transmission_map

__version__ = "0.1.0"

__all__ = [
    "KB_OVER_H",
    "MU_B_OVER_H",
    "ChipConfig",
    "ConfigError",
    "DegenerateInputError",
    "FitError",
    "GridTooLargeError",
    "LerParams",
    "NumericalError",
    "ResonanceError",
    "SingularResponseError",
    "SpinEnsembleParams",
    "TrackingError",
    "build_hamiltonian",
    "eigensolve",
    "load_config",
    "normal_modes",
    "polariton_angle",
    "s21_closed_pair",
    "s21_general",
    "s21_single",
    "solve",
    "spin_frequency",
    "thermal_coupling",
    "track_branches",
    "transmission_map",
    "validate_config",
]
