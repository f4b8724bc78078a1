"""Exception types raised by the numerical modules."""


class AccuracyError(ArithmeticError):
    """A quadrature or series did not reach its requested tolerance."""


class StabilityError(ArithmeticError):
    """Norm drift during time stepping exceeded the configured budget."""

    def __init__(self, message: str, tau: float | None = None):
        super().__init__(message)
        self.tau = tau


class EscapeError(ArithmeticError):
    """State mass reached the lattice boundary; the box is too small for the horizon."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class ConfigError(ValueError):
    """Experiment configuration failed validation."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
