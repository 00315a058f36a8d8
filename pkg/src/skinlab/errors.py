"""Exception types shared across the package."""


class SkinlabError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(SkinlabError, ValueError):
    """An argument violates a documented precondition (value, size, or range)."""


class NotPSDError(SkinlabError):
    """A matrix required to be positive semidefinite has an eigenvalue below tolerance."""

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NumericalFailure(SkinlabError):
    """A dense solver produced results outside its guaranteed tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class UnderflowError(SkinlabError):
    """Every sampled value sits below the resolvable floating-point floor."""


class ConfigError(SkinlabError, ValueError):
    """An experiment configuration failed validation; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
