"""
Poincaré ball model and its conversions to the Lorentz and Klein models.

Both balls have radius 1/√κ.
"""

import numpy as np

from geometry.curvature import CurvatureLike, as_curvature, as_points
from geometry.klein import check_in_ball, boundary_gap


def lorentz_to_poincare(x, k: CurvatureLike) -> np.ndarray:
    """Stereographic projection ``x_space / (1 + √κ·x_time)``."""
    k = as_curvature(k)
    x = as_points(x, "Lorentz point")
    return x[..., 1:] / (1.0 + k.sqrt * x[..., :1])


def poincare_to_lorentz(p, k: CurvatureLike) -> np.ndarray:
    """
    Inverse stereographic projection onto the hyperboloid.

    ``time = (1/√κ)(1 + κ‖p‖²)/(1 - κ‖p‖²)``, ``space = 2p/(1 - κ‖p‖²)``.

    Raises:
        BoundaryError: If a point is too close to the boundary
    """
    k = as_curvature(k)
    p = as_points(p, "Poincare point")
    gap = check_in_ball(p, k)
    time = (2.0 - gap) / (k.sqrt * gap)
    space = 2.0 * p / gap[..., None]
    return np.concatenate([time[..., None], space], axis=-1)


def poincare_to_klein(p, k: CurvatureLike) -> np.ndarray:
    """``2p / (1 + κ‖p‖²)``."""
    k = as_curvature(k)
    p = as_points(p, "Poincare point")
    check_in_ball(p, k)
    return 2.0 * p / (2.0 - boundary_gap(p, k))[..., None]


def klein_to_poincare(x, k: CurvatureLike) -> np.ndarray:
    """
    ``x / (1 + √(1 - κ‖x‖²))``.

    Raises:
        BoundaryError: If a point is too close to the boundary
    """
    k = as_curvature(k)
    x = as_points(x, "Klein point")
    gap = check_in_ball(x, k)
    return x / (1.0 + np.sqrt(gap))[..., None]


def poincare_distance(p, q, k: CurvatureLike) -> np.ndarray:
    """Geodesic distance ``(1/√κ)·arcosh(1 + 2κ‖p-q‖²/((1 - κ‖p‖²)(1 - κ‖q‖²)))``."""
    k = as_curvature(k)
    p = as_points(p, "Poincare point")
    q = as_points(q, "Poincare point")
    gp = check_in_ball(p, k)
    gq = check_in_ball(q, k)
    diff = p - q
    arg = 1.0 + 2.0 * k.kappa * np.sum(diff * diff, axis=-1) / (gp * gq)
    return np.arccosh(arg) / k.sqrt


def pairwise_poincare_distance(p: np.ndarray, q: np.ndarray, k: CurvatureLike) -> np.ndarray:
    """Distance matrix between the rows of ``p`` (m, n) and ``q`` (c, n)."""
    k = as_curvature(k)
    gp = check_in_ball(p, k)
    gq = check_in_ball(q, k)
    diff = p[:, None, :] - q[None, :, :]
    sq = np.sum(diff * diff, axis=-1)
    arg = 1.0 + 2.0 * k.kappa * sq / np.outer(gp, gq)
    return np.arccosh(arg) / k.sqrt
