"""Exception types shared across the toolkit."""


class SimulationError(RuntimeError):
    """Base class for failures of a numerical run (CLI exit code 1)."""


class DivergenceError(SimulationError):
    """State left the finite working range during integration."""


class NoSpikingError(SimulationError):
    """No section crossings found while hunting for an orbit."""


class AdmissibilityError(SimulationError):
    """A path or control left the admissible state interval."""


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""
