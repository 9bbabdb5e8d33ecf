"""Exception types shared across the package."""


class LatticeClockError(Exception):
    """Base class for package-specific errors."""


class ConfigError(LatticeClockError):
    """Invalid run configuration (CLI exit code 2)."""


class NumericalError(LatticeClockError):
    """A numerical routine could not meet its accuracy contract (CLI exit code 3)."""


class CoincidentAtomsError(ValueError):
    """Two atoms share the same position; pair couplings are undefined."""


class SizeLimitError(ValueError):
    """Requested system exceeds an explicit size cap."""
