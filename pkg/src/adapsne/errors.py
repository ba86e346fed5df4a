class AdapsneError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(AdapsneError, ValueError):
    """An input violates a documented precondition."""


class ConfigError(ValidationError):
    """A run configuration is malformed or holds unknown keys."""


class DataError(ValidationError):
    """A dataset file cannot be parsed or holds invalid values."""


class NumericalError(AdapsneError, ArithmeticError):
    """The numerics diverged (NaN objective, non-finite coordinates)."""
