"""
Curvature, shared tolerances and Euclidean clipping.

All geometry functions take a :class:`Curvature` (κ = −c > 0). Points are
plain ``numpy`` arrays batched over leading axes:

* Lorentz points have shape ``(..., n + 1)`` laid out as ``[time; space]``.
* Klein and Poincaré points have shape ``(..., n)`` and live in the open ball
  of radius ``1/√κ``.
* Tangent (Euclidean) vectors have shape ``(..., n)``.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from utils.error_handling import ValidationError, ErrorHandler

# |<x,x>_L + 1/κ|·κ <= TOL_MANIFOLD·(1 + κ·time²) for points on the hyperboloid
TOL_MANIFOLD = 1e-9
# minimum 1 - κ‖x‖² for lifting a ball point
TOL_BOUNDARY = 1e-12
# below this t = √κ‖v‖ the exponential maps use their Taylor series
SERIES_THRESHOLD = 1e-4

DEFAULT_KAPPA = 0.05
DEFAULT_CLIP_RADIUS = 2.3


@dataclass(frozen=True)
class Curvature:
    """
    Positive curvature magnitude κ = −c.

    Attributes:
        kappa (float): κ > 0 and finite
    """

    kappa: float

    def __post_init__(self):
        try:
            value = float(self.kappa)
        except (TypeError, ValueError):
            raise ValidationError(f"Curvature must be a real number, got {self.kappa!r}")
        if not math.isfinite(value) or value <= 0.0:
            raise ValidationError(f"Curvature kappa must be positive and finite, got {value}")
        object.__setattr__(self, 'kappa', value)

    @property
    def sqrt(self) -> float:
        return math.sqrt(self.kappa)

    @property
    def radius(self) -> float:
        """Radius 1/√κ of the Klein and Poincaré balls."""
        return 1.0 / math.sqrt(self.kappa)

    @classmethod
    def from_gaussian(cls, c: float) -> 'Curvature':
        """Build from the (negative) Gaussian curvature c."""
        return cls(-c)


CurvatureLike = Union[Curvature, float, int]


def as_curvature(k: CurvatureLike) -> Curvature:
    """Accept a Curvature or a bare positive κ."""
    if isinstance(k, Curvature):
        return k
    return Curvature(k)


def as_points(x, what: str = "points") -> np.ndarray:
    """Convert to a finite float64 array with at least one axis."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        raise ValidationError(f"{what} must be a vector, got a scalar")
    return ErrorHandler.check_finite(arr, what, ValidationError)


def clip_euclidean(v, r: float) -> np.ndarray:
    """
    Rescale vectors whose norm exceeds ``r`` onto the sphere of radius ``r``.

    ``r = inf`` leaves every vector unchanged (the no-clipping ablation).

    Args:
        v: Tangent vectors, shape ``(..., n)``
        r (float): Clip radius, > 0

    Returns:
        np.ndarray: Clipped vectors with norm <= r
    """
    r = float(r)
    if not r > 0.0:
        raise ValidationError(f"Clip radius must be positive, got {r}")
    v = as_points(v, "tangent vector")
    if math.isinf(r):
        return v.copy()
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.where(norms > r, r / np.where(norms > 0.0, norms, 1.0), 1.0)
    return v * scale
