"""Exception types shared across the simulator."""


class FfrsimError(Exception):
    """Base class for simulator errors."""


class ConfigurationError(FfrsimError, ValueError):
    """A model or scenario parameter violates its documented range."""


class SystemCollapseError(FfrsimError, RuntimeError):
    """No online inertia remains, so the swing equation is undefined."""


class SimulationError(FfrsimError, RuntimeError):
    """The integrator produced a non-finite state."""


class MetricsError(FfrsimError, ValueError):
    """A time series is too short for the requested metric windows."""
