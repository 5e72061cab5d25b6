"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class FracPhiError(Exception):
    exit_code = 1


class ConfigError(FracPhiError, ValueError):
    """Invalid user input or configuration."""

    exit_code = 2


class NumericalError(FracPhiError, RuntimeError):
    """A numerical routine failed or lost accuracy."""

    exit_code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class PreconditionError(FracPhiError, ValueError):
    """An operation was called outside its mathematical preconditions."""

    exit_code = 4

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class MassBlowupError(NumericalError):
    """Feynman-Kac weights exceeded the overflow guard."""


class BridgeSamplingError(NumericalError):
    """Bridge sampler hit its rejection cap without a usable fallback."""


class CensoringError(NumericalError):
    """Too much Monte Carlo weight was censored at the time horizon."""


class OutOfRangeError(PreconditionError):
    """A grid point lies below the ground-state floor or outside the grid."""
