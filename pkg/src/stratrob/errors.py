"""Exception hierarchy shared across the package."""


class StratRobError(Exception):
    pass


class InputError(StratRobError, ValueError):
    """Bad shapes, indices or argument values."""


class CapacityError(StratRobError):
    """An enumeration exceeds the desk-scale guard."""


class DomainError(StratRobError, ValueError):
    """A quantity is mathematically undefined for the given arguments."""


class DataError(StratRobError, ValueError):
    """Dataset contents are inconsistent (labels out of range, ragged rows...)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(StratRobError, ValueError):
    """Configuration is invalid; the CLI maps this to exit code 2."""
