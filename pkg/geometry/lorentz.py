"""
Lorentz hyperboloid model.

Points are arrays ``[time; space]`` on the upper sheet
``<x,x>_L = -1/κ, time > 0``.
"""

import logging
from typing import Optional

import numpy as np

from geometry.curvature import (
    CurvatureLike, as_curvature, as_points,
    TOL_MANIFOLD, SERIES_THRESHOLD,
)
from utils.error_handling import (
    ValidationError, ManifoldError, DegenerateError, ExpMapOverflowError,
)

logger = logging.getLogger(__name__)

# sinh overflows float64 a little above 710; cosh/time follows it
SINH_OVERFLOW = 709.0
# |<s,s>_L| below this (times 1/κ) is treated as a null vector
TOL_DEGENERATE = 1e-15


def _check_same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[-1] != y.shape[-1]:
        raise ValidationError(
            f"Dimension mismatch: {x.shape[-1] - 1} vs {y.shape[-1] - 1} spatial components"
        )


def lorentz_inner(x, y) -> np.ndarray:
    """
    Lorentz inner product ``-x_time*y_time + <x_space, y_space>``.

    Broadcasts over leading axes.

    Raises:
        ValidationError: If the spatial dimensions differ
    """
    x = as_points(x, "Lorentz point")
    y = as_points(y, "Lorentz point")
    _check_same_dim(x, y)
    return -x[..., 0] * y[..., 0] + np.sum(x[..., 1:] * y[..., 1:], axis=-1)


def pairwise_lorentz_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix of inner products between rows of ``x`` (m, n+1) and ``y`` (k, n+1)."""
    _check_same_dim(x, y)
    return x[:, 1:] @ y[:, 1:].T - np.outer(x[:, 0], y[:, 0])


def lift_time(space, k: CurvatureLike) -> np.ndarray:
    """
    Complete spatial coordinates with ``time = sqrt(1/κ + <space, space>)``.

    Args:
        space: Spatial components, shape ``(..., n)``
        k: Curvature

    Returns:
        np.ndarray: Lorentz points, shape ``(..., n + 1)``
    """
    k = as_curvature(k)
    space = as_points(space, "spatial components")
    time = np.hypot(k.radius, np.linalg.norm(space, axis=-1))
    return np.concatenate([time[..., None], space], axis=-1)


def origin(n: int, k: CurvatureLike) -> np.ndarray:
    """The hyperboloid origin ``[1/√κ; 0]`` with ``n`` spatial components."""
    k = as_curvature(k)
    point = np.zeros(n + 1)
    point[0] = k.radius
    return point


def manifold_residual(x, k: CurvatureLike) -> np.ndarray:
    """``|<x,x>_L + 1/κ| · κ`` (relative violation of the hyperboloid constraint)."""
    k = as_curvature(k)
    return np.abs(lorentz_inner(x, x) + 1.0 / k.kappa) * k.kappa


def is_on_manifold(x, k: CurvatureLike, tol: float = TOL_MANIFOLD) -> np.ndarray:
    """
    Boolean mask of points on the upper sheet.

    The residual ``|<x,x>_L + 1/κ|·κ`` may reach ``tol·(1 + κ·time²)``, the
    roundoff scale of ``<x,x>_L`` for points far from the origin.
    """
    kappa = as_curvature(k).kappa
    x = np.asarray(x, dtype=np.float64)
    finite = np.all(np.isfinite(x), axis=-1)
    with np.errstate(invalid='ignore', over='ignore'):
        time_sq = x[..., 0] ** 2
        residual = np.abs(-time_sq + np.sum(x[..., 1:] ** 2, axis=-1) + 1.0 / kappa) * kappa
        bound = tol * (1.0 + kappa * time_sq)
    return finite & (x[..., 0] > 0.0) & (residual <= bound)


def check_on_manifold(x, k: CurvatureLike, tol: float = TOL_MANIFOLD) -> np.ndarray:
    """
    Return ``x`` as an array after checking every point is on the hyperboloid.

    Raises:
        ManifoldError: If any point violates the constraint
    """
    x = as_points(x, "Lorentz point")
    ok = is_on_manifold(x, k, tol)
    if not np.all(ok):
        bad = int(np.count_nonzero(~ok))
        raise ManifoldError(f"{bad} point(s) are not on the hyperboloid (tol={tol})")
    return x


def lorentz_distance(x, y, k: CurvatureLike) -> np.ndarray:
    """
    Geodesic distance ``(1/√κ)·arcosh(-κ<x,y>_L)``.

    The arcosh argument is clamped to ``>= 1`` so roundoff on near-identical
    points yields 0 instead of NaN.
    """
    k = as_curvature(k)
    arg = np.maximum(-k.kappa * lorentz_inner(x, y), 1.0)
    return np.arccosh(arg) / k.sqrt


def pairwise_lorentz_distance(x: np.ndarray, y: np.ndarray, k: CurvatureLike) -> np.ndarray:
    """Distance matrix between the rows of ``x`` and ``y``."""
    k = as_curvature(k)
    arg = np.maximum(-k.kappa * pairwise_lorentz_inner(x, y), 1.0)
    return np.arccosh(arg) / k.sqrt


def squared_lorentzian_distance(x, y, k: CurvatureLike) -> np.ndarray:
    """
    Squared Lorentzian distance ``-2/κ - 2<x,y>_L``.

    Vanishes for ``x == y`` on the hyperboloid; tiny negative roundoff is
    clamped to 0.
    """
    k = as_curvature(k)
    return np.maximum(-2.0 / k.kappa - 2.0 * lorentz_inner(x, y), 0.0)


def pairwise_squared_lorentzian_distance(x: np.ndarray, y: np.ndarray, k: CurvatureLike) -> np.ndarray:
    k = as_curvature(k)
    return np.maximum(-2.0 / k.kappa - 2.0 * pairwise_lorentz_inner(x, y), 0.0)


def sinhc(t: np.ndarray) -> np.ndarray:
    """``sinh(t)/t`` with the 3-term series near 0."""
    t = np.asarray(t, dtype=np.float64)
    small = t < SERIES_THRESHOLD
    safe = np.where(small, 1.0, t)
    t2 = t * t
    return np.where(small, 1.0 + t2 / 6.0 + t2 * t2 / 120.0, np.sinh(safe) / safe)


def exp_map_lorentz(v, k: CurvatureLike) -> np.ndarray:
    """
    Exponential map from the tangent space at the origin onto the hyperboloid.

    ``x_space = sinh(√κ‖v‖)/(√κ‖v‖)·v`` and the time component is lifted.

    Args:
        v: Tangent vectors, shape ``(..., n)``
        k: Curvature

    Returns:
        np.ndarray: Lorentz points, shape ``(..., n + 1)``

    Raises:
        ExpMapOverflowError: If √κ‖v‖ exceeds the sinh overflow threshold
    """
    k = as_curvature(k)
    v = as_points(v, "tangent vector")
    t = k.sqrt * np.linalg.norm(v, axis=-1)
    if np.any(t > SINH_OVERFLOW):
        raise ExpMapOverflowError(
            f"Exponential map overflow: sqrt(kappa)*|v| = {float(np.max(t)):.3f} > {SINH_OVERFLOW}"
        )
    space = sinhc(t)[..., None] * v
    return lift_time(space, k)


def lorentz_centroid(points, k: CurvatureLike, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Weighted Lorentz centroid ``(1/√κ)·s/|‖s‖_L|`` with ``s = Σ w_i x_i``.

    It minimizes the weighted sum of squared Lorentzian distances over the
    hyperboloid.

    Args:
        points: Lorentz points, shape ``(m, n + 1)``
        k: Curvature
        weights: Positive weights, shape ``(m,)``; uniform when omitted

    Returns:
        np.ndarray: Centroid, shape ``(n + 1,)``

    Raises:
        ValidationError: If the set is empty or weights are invalid
        DegenerateError: If the Lorentz norm of the weighted sum vanishes
    """
    k = as_curvature(k)
    points = as_points(points, "Lorentz points")
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValidationError("Lorentz centroid needs a non-empty (m, n+1) point set")
    weights = check_weights(weights, points.shape[0])
    total = weights @ points
    norm_sq = -lorentz_inner(total, total)
    if not norm_sq > TOL_DEGENERATE / k.kappa * float(np.sum(weights)) ** 2:
        raise DegenerateError(f"Weighted sum has degenerate Lorentz norm ({norm_sq:.3e})")
    return total / (k.sqrt * np.sqrt(norm_sq))


def check_weights(weights: Optional[np.ndarray], m: int) -> np.ndarray:
    """Uniform weights when omitted; otherwise ``m`` positive finite weights."""
    if weights is None:
        return np.ones(m)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (m,):
        raise ValidationError(f"Expected {m} weights, got shape {weights.shape}")
    if not np.all(np.isfinite(weights)) or not np.all(weights > 0.0):
        raise ValidationError("Weights must be positive and finite")
    return weights
