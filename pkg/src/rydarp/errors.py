"""Exception types shared across the package."""


class RydArpError(Exception):
    """Base class for all package errors."""


class ConfigError(RydArpError, ValueError):
    """Invalid configuration: unknown keys, out-of-range values, wrong level scheme."""


class DomainError(RydArpError, ValueError):
    """Operation evaluated outside its mathematical domain (e.g. zero one-photon detuning)."""


class PropagationError(RydArpError, RuntimeError):
    """Time propagation failed: step-size underflow or invariant violation."""


class CalibrationError(RydArpError, RuntimeError):
    """Gate delay calibration could not bracket the phase target."""
