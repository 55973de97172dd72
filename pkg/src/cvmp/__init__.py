"""Bayesian activation mapping for complex-valued fMRI."""

from .estimators import CartesianSampler, CVMPSampler, MagnitudeOnlySampler
from .exceptions import ConfigError, DataError, NumericalError
from .model import (ComplexImageSeries, DesignPair, PolarCoefficients,
                    arctan4, build_design, phase_basis, polar_mean)

__version__ = "0.1.0"

__all__ = ["CVMPSampler", "MagnitudeOnlySampler", "CartesianSampler",
           "ConfigError", "DataError", "NumericalError",
           "ComplexImageSeries", "DesignPair", "PolarCoefficients",
           "arctan4", "build_design", "phase_basis", "polar_mean"]
