"""Exception hierarchy shared across the package and mapped to CLI exit codes."""


class AgnoctlError(Exception):
    """Base class for package errors."""


class ConfigError(AgnoctlError):
    """Invalid configuration or grid (CLI exit code 2)."""


class DivergenceError(AgnoctlError):
    """Numerical divergence during a solve (CLI exit code 3)."""


class FieldIOError(AgnoctlError):
    """Corrupt or unreadable value-field container (CLI exit code 4)."""
