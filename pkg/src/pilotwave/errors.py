"""Exception types shared across the package."""


class PilotWaveError(Exception):
    """Base class for all errors raised by pilotwave."""


class DomainError(PilotWaveError, ValueError):
    """A configuration lies inside a regularized slit ball or outside a window."""


class NodeError(PilotWaveError, ArithmeticError):
    """The wavefunction (almost) vanishes, so phase and velocity are undefined."""


class QuadratureError(PilotWaveError, RuntimeError):
    """A numerical integral did not reach its requested tolerance."""


class SamplingError(PilotWaveError, RuntimeError):
    """Initial-configuration sampling failed (e.g. window too small)."""


class ConfigError(PilotWaveError, ValueError):
    """Invalid run configuration. ``path`` names the offending field."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class NoCrossingError(PilotWaveError, LookupError):
    """A particle never reached the detection plane within the horizon."""
