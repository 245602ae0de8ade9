"""Least-squares extraction of circuit and spin parameters from traces."""

from .models import (
    MODELS,
    LinewidthFieldFit,
    ResonanceFit,
    StretchedExponentialFit,
    ThermalPolarizationFit,
    fit_linewidth_vs_field,
    fit_resonance,
    fit_stretched_exponential,
    fit_thermal_polarization,
    linewidth_model,
    resonance_model,
    stretched_exponential,
    thermal_model,
)
from .results import FitResult, Trace, read_trace_csv, write_trace_csv
from .solver import LMResult, levenberg_marquardt

__all__ = [
    "MODELS",
    "FitResult",
    "LMResult",
    "LinewidthFieldFit",
    "ResonanceFit",
    "StretchedExponentialFit",
    "ThermalPolarizationFit",
    "Trace",
    "fit_linewidth_vs_field",
    "fit_resonance",
    "fit_stretched_exponential",
    "fit_thermal_polarization",
    "levenberg_marquardt",
    "linewidth_model",
    "read_trace_csv",
    "resonance_model",
    "stretched_exponential",
    "thermal_model",
    "write_trace_csv",
]
