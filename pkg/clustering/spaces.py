"""
Metric spaces for K-Means: a distance, a centroid and a point validator.

Three instantiations are provided:

* ``euclidean``: L2 distance and arithmetic mean.
* ``lorentz``: hyperboloid geodesic distance and Lorentz centroid; the
  objective is the squared Lorentzian distance, which the centroid minimizes
  exactly.
* ``poincare_via_klein``: Poincaré distance; the centroid maps to the Klein
  model, takes the Einstein midpoint and maps back.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from geometry import (
    Curvature, as_curvature, is_on_manifold, is_in_ball,
    lorentz_distance, pairwise_lorentz_distance,
    squared_lorentzian_distance, lorentz_centroid,
    poincare_distance, pairwise_poincare_distance,
    poincare_to_klein, klein_to_poincare, einstein_midpoint,
)
from utils.error_handling import ValidationError

logger = logging.getLogger(__name__)

SPACE_MODELS = ('euclidean', 'lorentz', 'poincare_via_klein')
SPOT_CHECK_SIZE = 8


@dataclass(frozen=True)
class MetricSpace:
    """
    Distance/centroid abstraction consumed by the K-Means engine.

    Attributes:
        name (str): Model name
        distance (Callable): Broadcasting distance between paired points
        pairwise_distance (Callable): ``(m, d), (c, d) -> (m, c)`` distance matrix
        centroid (Callable): ``(points, weights) -> point``
        validate (Callable): ``points -> bool mask`` of admissible points
        cost (Callable): Per-pair objective term between paired points
        curvature (Optional[Curvature]): κ for hyperbolic models
    """

    name: str
    distance: Callable[[np.ndarray, np.ndarray], np.ndarray]
    pairwise_distance: Callable[[np.ndarray, np.ndarray], np.ndarray]
    centroid: Callable[..., np.ndarray]
    validate: Callable[[np.ndarray], np.ndarray]
    cost: Callable[[np.ndarray, np.ndarray], np.ndarray]
    curvature: Optional[Curvature] = None

    def spot_check(self, points: np.ndarray) -> None:
        """
        Check symmetry and zero self-distance on a sample of ``points``.

        Raises:
            ValidationError: If the distance is not symmetric or not zero on
                identical points
        """
        sample = points[:SPOT_CHECK_SIZE]
        if sample.shape[0] == 0:
            return
        d = self.pairwise_distance(sample, sample)
        scale = 1e-6 * (1.0 + float(np.max(np.abs(sample))))
        if not np.allclose(d, d.T, rtol=1e-9, atol=scale):
            raise ValidationError(f"{self.name} distance is not symmetric on sampled points")
        if np.max(np.abs(np.diag(d))) > scale:
            raise ValidationError(f"{self.name} distance is not zero on identical points")


def _euclidean_pairwise(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _euclidean_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)


def _euclidean_centroid(points: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
    return np.average(points, axis=0, weights=weights)


def _euclidean_cost(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = np.asarray(x) - np.asarray(y)
    return np.sum(diff * diff, axis=-1)


def _euclidean_validate(points: np.ndarray) -> np.ndarray:
    return np.all(np.isfinite(points), axis=-1)


def make_space(model: str, k: Optional[Curvature] = None) -> MetricSpace:
    """
    Build the metric space for a model name.

    Args:
        model (str): One of ``euclidean``, ``lorentz``, ``poincare_via_klein``
        k (Optional[Curvature]): Curvature, required for hyperbolic models

    Returns:
        MetricSpace: The space handle

    Raises:
        ValidationError: For unknown models or missing curvature
    """
    if model not in SPACE_MODELS:
        raise ValidationError(f"Unknown space {model!r}; expected one of {SPACE_MODELS}")

    if model == 'euclidean':
        if k is not None:
            logger.debug("Curvature ignored for the euclidean space")
        return MetricSpace(
            name='euclidean',
            distance=_euclidean_distance,
            pairwise_distance=_euclidean_pairwise,
            centroid=_euclidean_centroid,
            validate=_euclidean_validate,
            cost=_euclidean_cost,
        )

    if k is None:
        raise ValidationError(f"The {model} space requires a curvature")
    k = as_curvature(k)

    if model == 'lorentz':
        return MetricSpace(
            name='lorentz',
            distance=lambda x, y: lorentz_distance(x, y, k),
            pairwise_distance=lambda x, y: pairwise_lorentz_distance(x, y, k),
            centroid=lambda points, weights=None: lorentz_centroid(points, k, weights),
            validate=lambda points: is_on_manifold(points, k),
            cost=lambda x, y: squared_lorentzian_distance(x, y, k),
            curvature=k,
        )

    def poincare_centroid(points: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
        midpoint = einstein_midpoint(poincare_to_klein(points, k), k, weights)
        return klein_to_poincare(midpoint, k)

    return MetricSpace(
        name='poincare_via_klein',
        distance=lambda x, y: poincare_distance(x, y, k),
        pairwise_distance=lambda x, y: pairwise_poincare_distance(x, y, k),
        centroid=poincare_centroid,
        validate=lambda points: is_in_ball(points, k),
        cost=lambda x, y: poincare_distance(x, y, k) ** 2,
        curvature=k,
    )
