"""Chirped-pulse adiabatic rapid passage for interacting Rydberg atom pairs.

Simulates two-photon chirped excitation of two three- or four-level atoms to
the double Rydberg state: dressed-state spectra, open-system (Lindblad)
dynamics, transfer-efficiency sweeps and a two-step controlled-phase gate
with delay calibration and fidelity evaluation.
"""
from ._kernels import backend_name
from .errors import (CalibrationError, ConfigError, DomainError,
                     PropagationError, RydArpError)
from .params import (AtomSystem, DrivePulses, PulseSet, SimGrid, UnitConvention,
                     DEFAULT_CONVENTION, gaussian_rabi, two_photon_rabi)

__version__ = "0.1.0"

__all__ = [
    "AtomSystem", "DrivePulses", "PulseSet", "SimGrid", "UnitConvention",
    "DEFAULT_CONVENTION", "gaussian_rabi", "two_photon_rabi", "backend_name",
    "RydArpError", "ConfigError", "DomainError", "PropagationError",
    "CalibrationError", "__version__",
]
