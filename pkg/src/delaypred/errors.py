"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Matrix or vector dimensions are mutually inconsistent."""


class ConfigError(ValueError):
    """An experiment or plant description failed validation."""


class InfeasibleError(RuntimeError):
    """The semidefinite backend reported the design problem infeasible."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
