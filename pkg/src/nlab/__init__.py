"""Oscillator-picture scattering laboratory for a Schrödinger particle in
external electromagnetic fields."""
from .errors import AccuracyError, ConfigError, EscapeError, StabilityError
from .lattice import GridSpec, SpatialProfile, WaveFunction
from .propagate import PropagatorConfig

__version__ = "0.1.0"

__all__ = ["GridSpec", "WaveFunction", "SpatialProfile", "PropagatorConfig",
           "AccuracyError", "StabilityError", "EscapeError", "ConfigError", "__version__"]
