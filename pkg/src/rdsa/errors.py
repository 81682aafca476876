"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid algorithm, distribution, schedule or experiment configuration."""


class NumericalError(ArithmeticError):
    """A numerical kernel failed (non-convergence, loss of definiteness)."""
