"""Numerics for fractional P(phi)_1-processes.

Stable process sampling and densities, fractional Schrodinger spectra,
Feynman-Kac estimators, intrinsic ultracontractivity diagnostics and
Gibbs measure consistency checks on path space.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    FracPhiError,
    ConfigError,
    NumericalError,
    PreconditionError,
)
from .stable import StableParams, PathSkeleton, MCEstimate  # noqa: F401
