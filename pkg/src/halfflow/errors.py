"""Exception hierarchy shared by all halfflow modules."""


class HalfflowError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(HalfflowError, ValueError):
    """Invalid grid, solver or run configuration."""


class DomainError(HalfflowError, ValueError):
    """Argument outside the admissible domain of an operation."""


class DataError(HalfflowError, ValueError):
    """Sampled or loaded data is not usable (e.g. non-finite values)."""


class ShapeError(HalfflowError, ValueError):
    """Fields that must share a grid, target dimension or mesh do not."""


class InterfaceError(HalfflowError, ValueError):
    """A caller asked for something the data structure cannot provide."""


class NonconvergenceError(HalfflowError, RuntimeError):
    """Fixed-point iteration diverged; ``history`` holds the sup-differences."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
