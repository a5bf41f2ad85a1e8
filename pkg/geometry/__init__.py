"""
Hyperbolic Geometry Module

Lorentz, Klein and Poincaré model primitives: inner products, lifts,
distances, exponential maps, model conversions, midpoints and centroids.
"""

from .curvature import (
    Curvature, as_curvature, clip_euclidean,
    TOL_MANIFOLD, TOL_BOUNDARY, DEFAULT_KAPPA, DEFAULT_CLIP_RADIUS,
)
from .lorentz import (
    lorentz_inner, pairwise_lorentz_inner, lift_time, origin,
    is_on_manifold, check_on_manifold, manifold_residual,
    lorentz_distance, pairwise_lorentz_distance,
    squared_lorentzian_distance, pairwise_squared_lorentzian_distance,
    exp_map_lorentz, lorentz_centroid,
)
from .klein import (
    exp_map_klein, lorentz_to_klein, klein_to_lorentz, lorentz_factor,
    einstein_midpoint, klein_distance, is_in_ball,
)
from .poincare import (
    lorentz_to_poincare, poincare_to_lorentz, poincare_to_klein, klein_to_poincare,
    poincare_distance, pairwise_poincare_distance,
)

__all__ = [
    'Curvature', 'as_curvature', 'clip_euclidean',
    'TOL_MANIFOLD', 'TOL_BOUNDARY', 'DEFAULT_KAPPA', 'DEFAULT_CLIP_RADIUS',
    'lorentz_inner', 'pairwise_lorentz_inner', 'lift_time', 'origin',
    'is_on_manifold', 'check_on_manifold', 'manifold_residual',
    'lorentz_distance', 'pairwise_lorentz_distance',
    'squared_lorentzian_distance', 'pairwise_squared_lorentzian_distance',
    'exp_map_lorentz', 'lorentz_centroid',
    'exp_map_klein', 'lorentz_to_klein', 'klein_to_lorentz', 'lorentz_factor',
    'einstein_midpoint', 'klein_distance', 'is_in_ball',
    'lorentz_to_poincare', 'poincare_to_lorentz', 'poincare_to_klein', 'klein_to_poincare',
    'poincare_distance', 'pairwise_poincare_distance',
]
