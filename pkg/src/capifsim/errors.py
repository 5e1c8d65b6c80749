"""Exception hierarchy shared across the simulator."""


class CapifSimError(Exception):
    """Base class for every error raised by capifsim."""


class ConfigError(CapifSimError):
    """A configuration file or flag is invalid."""
