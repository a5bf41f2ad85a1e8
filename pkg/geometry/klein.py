"""
Klein model: projection of the hyperboloid onto the ball of radius 1/√κ.

Geodesics are straight chords, so midpoints are Lorentz-factor weighted means.
"""

from typing import Optional

import numpy as np

from geometry.curvature import (
    CurvatureLike, as_curvature, as_points, TOL_BOUNDARY, SERIES_THRESHOLD,
)
from geometry.lorentz import check_weights
from utils.error_handling import ValidationError, BoundaryError

# tanh(t) is capped here so exp-mapped points stay strictly inside the ball
MAX_RADIAL_FRACTION = 1.0 - 1e-12


def boundary_gap(x, k: CurvatureLike) -> np.ndarray:
    """``1 - κ‖x‖²`` for ball points (positive inside the ball)."""
    k = as_curvature(k)
    x = np.asarray(x, dtype=np.float64)
    return 1.0 - k.kappa * np.sum(x * x, axis=-1)


def is_in_ball(x, k: CurvatureLike, tol: float = TOL_BOUNDARY) -> np.ndarray:
    """Mask of finite ball points at least ``tol`` away from the boundary (in ``1 - κ‖x‖²``)."""
    x = np.asarray(x, dtype=np.float64)
    finite = np.all(np.isfinite(x), axis=-1)
    with np.errstate(invalid='ignore', over='ignore'):
        return finite & (boundary_gap(x, k) >= tol)


def check_in_ball(x, k: CurvatureLike, tol: float = TOL_BOUNDARY) -> np.ndarray:
    """
    Return ``1 - κ‖x‖²`` after checking every point can be lifted.

    Raises:
        BoundaryError: If a point is on, outside, or too close to the boundary
    """
    gap = boundary_gap(x, k)
    if np.any(gap < tol):
        raise BoundaryError(
            f"Ball point too close to the boundary: 1 - kappa*|x|^2 = {float(np.min(gap)):.3e} < {tol}"
        )
    return gap


def tanhc(t: np.ndarray) -> np.ndarray:
    """``tanh(t)/t`` with the 3-term series near 0."""
    t = np.asarray(t, dtype=np.float64)
    small = t < SERIES_THRESHOLD
    safe = np.where(small, 1.0, t)
    t2 = t * t
    return np.where(small, 1.0 - t2 / 3.0 + 2.0 * t2 * t2 / 15.0,
                    np.minimum(np.tanh(safe), MAX_RADIAL_FRACTION) / safe)


def exp_map_klein(v, k: CurvatureLike) -> np.ndarray:
    """
    Exponential map from the origin's tangent space into the Klein ball.

    ``x = tanh(√κ‖v‖)/(√κ‖v‖)·v``; the radial factor saturates just below 1.
    """
    k = as_curvature(k)
    v = as_points(v, "tangent vector")
    t = k.sqrt * np.linalg.norm(v, axis=-1)
    return tanhc(t)[..., None] * v


def lorentz_to_klein(x, k: CurvatureLike) -> np.ndarray:
    """Central projection ``x_space / (√κ·x_time)``."""
    k = as_curvature(k)
    x = as_points(x, "Lorentz point")
    return x[..., 1:] / (k.sqrt * x[..., :1])


def klein_to_lorentz(x, k: CurvatureLike) -> np.ndarray:
    """
    Lift a Klein point to the hyperboloid: ``(1/√(κ - κ²‖x‖²))·[1; √κ·x]``.

    Raises:
        BoundaryError: If ``1 - κ‖x‖² < TOL_BOUNDARY``
    """
    k = as_curvature(k)
    x = as_points(x, "Klein point")
    gap = check_in_ball(x, k)
    scale = 1.0 / np.sqrt(k.kappa * gap)
    return np.concatenate([scale[..., None], (scale * k.sqrt)[..., None] * x], axis=-1)


def lorentz_factor(x, k: CurvatureLike) -> np.ndarray:
    """
    Lorentz factor ``γ = 1/√(1 - κ‖x‖²)`` of Klein points (always >= 1).

    Raises:
        BoundaryError: If a point is too close to the boundary
    """
    x = as_points(x, "Klein point")
    return 1.0 / np.sqrt(check_in_ball(x, k))


def einstein_midpoint(points, k: CurvatureLike, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Einstein midpoint ``Σ w_i γ_i x_i / Σ w_i γ_i`` of Klein points.

    External weights multiply the Lorentz factors, so the result is the Klein
    projection of the weighted Lorentz centroid for any positive weights.

    Args:
        points: Klein points, shape ``(m, n)``
        k: Curvature
        weights: Positive weights, shape ``(m,)``; uniform when omitted

    Returns:
        np.ndarray: Midpoint, shape ``(n,)``

    Raises:
        ValidationError: If the set is empty
    """
    points = as_points(points, "Klein points")
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValidationError("Einstein midpoint needs a non-empty (m, n) point set")
    coeff = check_weights(weights, points.shape[0]) * lorentz_factor(points, k)
    return coeff @ points / np.sum(coeff)


def klein_distance(x, y, k: CurvatureLike) -> np.ndarray:
    """Geodesic distance ``(1/√κ)·arcosh((1 - κ<x,y>)/√((1 - κ‖x‖²)(1 - κ‖y‖²)))``."""
    k = as_curvature(k)
    x = as_points(x, "Klein point")
    y = as_points(y, "Klein point")
    gx = check_in_ball(x, k)
    gy = check_in_ball(y, k)
    arg = (1.0 - k.kappa * np.sum(x * y, axis=-1)) / np.sqrt(gx * gy)
    return np.arccosh(np.maximum(arg, 1.0)) / k.sqrt
