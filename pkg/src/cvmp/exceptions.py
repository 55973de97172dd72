class ConfigError(ValueError):
    """Invalid configuration or parameter values."""


class DataError(ValueError):
    """Inconsistent or malformed input data."""


class NumericalError(ArithmeticError):
    """A sampler quantity became non-finite or degenerate."""
