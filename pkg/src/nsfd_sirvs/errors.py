"""Exception types shared across the package."""


class SirvsError(Exception):
    """Base class for package-specific errors."""


class ConfigError(SirvsError, ValueError):
    """Invalid configuration: bad scenario files, missing coefficients, unknown names."""


class StepError(SirvsError, RuntimeError):
    """A time step could not be completed to tolerance.

    Carries the failing step index and the residual of the balance identity
    (or of the implicit solve) so callers can report where a run broke down.
    """

    def __init__(self, message: str, step: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.step = step
        self.residual = residual
