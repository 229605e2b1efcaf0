"""Point processes, Laplace-functional ordering and wireless-network Monte Carlo."""

from .errors import (
    CapExceededError,
    DuplicatePointError,
    NumericalGuardError,
    PpxError,
    QuadratureError,
    SingularPathLossError,
    SpecError,
)
from .pointproc import PointPattern, Window, sample

__all__ = [
    "CapExceededError",
    "DuplicatePointError",
    "NumericalGuardError",
    "PointPattern",
    "PpxError",
    "QuadratureError",
    "SingularPathLossError",
    "SpecError",
    "Window",
    "sample",
]
