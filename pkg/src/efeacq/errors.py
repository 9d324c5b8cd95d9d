"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class DomainError(ValueError):
    """Inputs violate a mathematical precondition (normalization, support, ...)."""


class DegenerateError(ValueError):
    """Inputs carry no usable mass or information."""


class NumericError(ArithmeticError):
    """A factorization or other numerical routine failed."""


class ConvergenceError(ArithmeticError):
    def __init__(self, message, grad_norm=float("nan")):
        super().__init__(f"{message} (last gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


class ConfigError(ValueError):
    """Bad experiment or environment configuration."""
