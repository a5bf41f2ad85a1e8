"""
Tests for the geometry package: Lorentz, Klein and Poincaré primitives.

High-precision reference values come from mpmath at 50 digits.
"""

import mpmath as mp
import numpy as np
import pytest

from geometry import (
    Curvature, clip_euclidean, lorentz_inner, lift_time, origin, is_on_manifold, check_on_manifold,
    lorentz_distance, pairwise_lorentz_distance, squared_lorentzian_distance, exp_map_lorentz,
    lorentz_centroid, exp_map_klein, lorentz_to_klein, klein_to_lorentz, lorentz_factor,
    einstein_midpoint, klein_distance, is_in_ball, lorentz_to_poincare, poincare_to_lorentz,
    poincare_to_klein, klein_to_poincare, poincare_distance, pairwise_poincare_distance,
)
from utils.error_handling import (
    ValidationError, ManifoldError, BoundaryError, ExpMapOverflowError,
)

mp.mp.dps = 50

KAPPAS = (0.05, 0.5, 1.0, 2.0)


def random_tangent(rng, m, n, k, t_min=0.1, t_max=2.0):
    """Tangent vectors whose exp-map radius √κ‖v‖ lies in [t_min, t_max]."""
    v = rng.normal(size=(m, n))
    scale = rng.uniform(t_min, t_max, size=(m, 1)) / (np.sqrt(k) * np.linalg.norm(v, axis=1, keepdims=True))
    return v * scale


def random_lorentz(rng, m, n, k, **kwargs):
    return exp_map_lorentz(random_tangent(rng, m, n, k, **kwargs), k)


class TestCurvature:
    @pytest.mark.parametrize("bad", [0.0, -0.05, float('nan'), float('inf')])
    def test_rejects_non_positive_or_non_finite(self, bad):
        with pytest.raises(ValidationError):
            Curvature(bad)

    def test_from_gaussian_curvature(self):
        k = Curvature.from_gaussian(-0.05)
        assert k.kappa == 0.05
        assert k.radius == pytest.approx(1.0 / np.sqrt(0.05))


class TestLorentz:
    def test_origin_self_inner_product(self):
        for kappa in KAPPAS:
            o = origin(3, kappa)
            assert lorentz_inner(o, o) == pytest.approx(-1.0 / kappa, rel=1e-14)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            lorentz_inner(np.ones(3), np.ones(4))

    def test_lift_time_puts_points_on_manifold(self, rng):
        for kappa in KAPPAS:
            x = lift_time(rng.normal(size=(100, 5)) * 3.0, kappa)
            assert np.all(x[:, 0] > 0.0)
            assert np.all(is_on_manifold(x, kappa))

    def test_lift_of_zero_space_is_origin(self):
        np.testing.assert_array_equal(lift_time(np.zeros(2), 1.0), [1.0, 0.0, 0.0])

    def test_off_manifold_point_rejected(self):
        with pytest.raises(ManifoldError):
            check_on_manifold(np.array([[1.0, 5.0]]), 1.0)

    def test_far_exp_mapped_points_stay_on_manifold(self, rng):
        directions = rng.normal(size=(40, 6))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        norms = np.where(np.arange(40) % 2 == 0, 3.0, 60.0)
        x = exp_map_lorentz(directions * norms[:, None], 0.05)
        assert np.max(x[:, 0]) > 1e6
        assert np.all(is_on_manifold(x, 0.05))
        check_on_manifold(x, 0.05)
        nudged = x.copy()
        nudged[1, 0] *= 1.0 + 1e-6
        assert not is_on_manifold(nudged[1], 0.05)

    def test_distance_to_self_vanishes_and_is_symmetric(self, rng):
        x = random_lorentz(rng, 50, 4, 0.05)
        y = random_lorentz(rng, 50, 4, 0.05)
        assert np.all(lorentz_distance(x, x, 0.05) < 1e-6)
        np.testing.assert_allclose(lorentz_distance(x, y, 0.05), lorentz_distance(y, x, 0.05), rtol=1e-14)

    def test_distance_matches_high_precision_oracle(self):
        kappa = mp.mpf('0.05')
        space = np.array([1.7, -0.4, 2.2])
        x = lift_time(space, 0.05)
        time = mp.sqrt(1 / kappa + sum(mp.mpf(float(s)) ** 2 for s in space))
        expected = mp.acosh(mp.sqrt(kappa) * time) / mp.sqrt(kappa)
        assert lorentz_distance(origin(3, 0.05), x, 0.05) == pytest.approx(float(expected), rel=1e-12)

    def test_pairwise_matches_broadcast_distance(self, rng):
        x = random_lorentz(rng, 7, 3, 0.5)
        y = random_lorentz(rng, 5, 3, 0.5)
        expected = lorentz_distance(x[:, None, :], y[None, :, :], 0.5)
        np.testing.assert_allclose(pairwise_lorentz_distance(x, y, 0.5), expected, rtol=1e-10)

    def test_triangle_inequality(self, rng):
        for kappa in KAPPAS:
            x, y, z = (random_lorentz(rng, 500, 6, kappa) for _ in range(3))
            dxz = lorentz_distance(x, z, kappa)
            assert np.all(dxz <= lorentz_distance(x, y, kappa) + lorentz_distance(y, z, kappa) + 1e-9)

    def test_squared_lorentzian_distance_near_zero_on_identical_points(self, rng):
        x = random_lorentz(rng, 20, 3, 2.0)
        assert np.all(squared_lorentzian_distance(x, x, 2.0) < 1e-10)


class TestExpMap:
    def test_operating_point_matches_oracle(self):
        v = np.zeros(16)
        v[0] = 2.3
        x = exp_map_lorentz(v, 0.05)
        kappa = mp.mpf('0.05')
        expected = mp.sinh(mp.sqrt(kappa) * mp.mpf('2.3')) / mp.sqrt(kappa)
        assert np.linalg.norm(x[1:]) == pytest.approx(float(expected), rel=1e-14)
        assert is_on_manifold(x, 0.05)

    def test_radial_isometry(self, rng):
        for kappa in KAPPAS:
            v = random_tangent(rng, 1000, 8, kappa, t_min=0.01, t_max=5.0)
            d = lorentz_distance(origin(8, kappa), exp_map_lorentz(v, kappa), kappa)
            np.testing.assert_allclose(d, np.linalg.norm(v, axis=1), rtol=1e-8)

    def test_tiny_vectors_use_series(self):
        v = np.array([1e-9, -2e-9, 0.0])
        x = exp_map_lorentz(v, 0.05)
        assert np.all(np.isfinite(x))
        np.testing.assert_allclose(x[1:], v, rtol=1e-12)
        np.testing.assert_array_equal(exp_map_lorentz(np.zeros(3), 0.05), origin(3, 0.05))

    def test_overflow_is_reported(self):
        with pytest.raises(ExpMapOverflowError):
            exp_map_lorentz(np.array([1e4, 0.0]), 1.0)

    def test_klein_exp_map_is_projected_lorentz_exp_map(self, rng):
        for kappa in KAPPAS:
            v = random_tangent(rng, 200, 5, kappa, t_min=0.01, t_max=4.0)
            np.testing.assert_allclose(exp_map_klein(v, kappa),
                                       lorentz_to_klein(exp_map_lorentz(v, kappa), kappa),
                                       rtol=1e-12, atol=1e-14)

    def test_klein_exp_map_saturates_inside_ball(self):
        v = np.array([30.0 / np.sqrt(0.05), 0.0])
        x = exp_map_klein(v, 0.05)
        assert is_in_ball(x, 0.05)
        assert np.all(np.isfinite(klein_to_lorentz(x, 0.05)))


class TestClip:
    def test_long_vector_scaled_to_radius(self):
        z = np.array([3.0, 4.0])
        np.testing.assert_allclose(clip_euclidean(z, 2.3), z * 2.3 / 5.0, rtol=1e-15)

    def test_short_vector_unchanged(self):
        z = np.array([0.3, -0.4])
        np.testing.assert_array_equal(clip_euclidean(z, 2.3), z)

    def test_norm_bound_and_idempotence(self, rng):
        z = rng.normal(size=(200, 7)) * 3.0
        once = clip_euclidean(z, 2.3)
        assert np.all(np.linalg.norm(once, axis=1) <= 2.3 * (1 + 1e-12))
        np.testing.assert_allclose(clip_euclidean(once, 2.3), once, rtol=1e-15)

    def test_infinite_radius_is_identity(self, rng):
        z = rng.normal(size=(10, 3)) * 100.0
        np.testing.assert_array_equal(clip_euclidean(z, float('inf')), z)

    @pytest.mark.parametrize("radius", [0.0, -1.0])
    def test_non_positive_radius_rejected(self, radius):
        with pytest.raises(ValidationError):
            clip_euclidean(np.ones(2), radius)


class TestKleinLorentzCorrespondence:
    def test_round_trip_identity(self, rng):
        for kappa in KAPPAS:
            x = random_lorentz(rng, 2500, int(rng.integers(2, 65)), kappa)
            np.testing.assert_allclose(klein_to_lorentz(lorentz_to_klein(x, kappa), kappa), x,
                                       rtol=1e-9, atol=1e-12 / np.sqrt(kappa))

    def test_lorentz_factor_is_scaled_time(self, rng):
        for kappa in KAPPAS:
            x = random_lorentz(rng, 2500, 6, kappa)
            np.testing.assert_allclose(lorentz_factor(lorentz_to_klein(x, kappa), kappa),
                                       np.sqrt(kappa) * x[:, 0], rtol=1e-10)

    def test_boundary_point_cannot_be_lifted(self):
        with pytest.raises(BoundaryError):
            klein_to_lorentz(np.array([1.0 / np.sqrt(0.05), 0.0]), 0.05)

    def test_einstein_midpoint_equals_projected_lorentz_centroid(self, rng):
        for trial in range(10000):
            kappa = KAPPAS[trial % len(KAPPAS)]
            n = int(rng.integers(2, 65))
            m = int(rng.integers(1, 9))
            x = random_lorentz(rng, m, n, kappa)
            w = rng.uniform(0.1, 3.0, size=m)
            centroid = lorentz_to_klein(lorentz_centroid(x, kappa, w), kappa)
            midpoint = einstein_midpoint(lorentz_to_klein(x, kappa), kappa, w)
            np.testing.assert_allclose(centroid, midpoint, rtol=1e-9, atol=1e-12 / np.sqrt(kappa))

    def test_midpoint_of_single_point_is_the_point(self):
        x = np.array([[0.5, -1.0]])
        np.testing.assert_allclose(einstein_midpoint(x, 0.05), x[0], rtol=1e-15)

    def test_midpoint_of_symmetric_pair_is_origin(self):
        x = np.array([[1.0, 2.0], [-1.0, -2.0]])
        np.testing.assert_allclose(einstein_midpoint(x, 0.05), [0.0, 0.0], atol=1e-15)

    def test_invalid_weights_rejected(self):
        x = np.array([[1.0, 2.0], [-1.0, -2.0]])
        with pytest.raises(ValidationError):
            einstein_midpoint(x, 0.05, np.array([1.0, -1.0]))
        with pytest.raises(ValidationError):
            lorentz_centroid(np.empty((0, 3)), 0.05)


class TestLorentzCentroid:
    def test_centroid_is_on_manifold(self, rng):
        for kappa in KAPPAS:
            c = lorentz_centroid(random_lorentz(rng, 30, 4, kappa), kappa)
            assert is_on_manifold(c, kappa)

    def test_centroid_minimizes_squared_lorentzian_cost(self, rng):
        kappa = 0.5
        x = random_lorentz(rng, 25, 3, kappa)
        w = rng.uniform(0.5, 2.0, size=25)
        c = lorentz_centroid(x, kappa, w)
        best = np.sum(w * squared_lorentzian_distance(x, c, kappa))
        scales = np.where(np.arange(10000) % 2 == 0, 0.3, 0.03)[:, None]
        others = lift_time(c[1:] + scales * rng.normal(size=(10000, 3)), kappa)
        costs = np.sum(w * squared_lorentzian_distance(x[None, :, :], others[:, None, :], kappa), axis=1)
        assert costs.shape == (10000,)
        assert np.all(costs >= best - 1e-9)

    def test_symmetric_pair_centroid_is_origin(self):
        v = np.array([[1.0, 0.5], [-1.0, -0.5]])
        c = lorentz_centroid(exp_map_lorentz(v, 1.0), 1.0)
        np.testing.assert_allclose(c, origin(2, 1.0), atol=1e-14)


class TestIsometries:
    def test_distances_agree_across_models(self, rng):
        for kappa in KAPPAS:
            n = int(rng.integers(2, 33))
            x = random_lorentz(rng, 2500, n, kappa)
            y = random_lorentz(rng, 2500, n, kappa)
            d = lorentz_distance(x, y, kappa)
            dk = klein_distance(lorentz_to_klein(x, kappa), lorentz_to_klein(y, kappa), kappa)
            dp = poincare_distance(lorentz_to_poincare(x, kappa), lorentz_to_poincare(y, kappa), kappa)
            np.testing.assert_allclose(dk, d, rtol=1e-8, atol=1e-10)
            np.testing.assert_allclose(dp, d, rtol=1e-8, atol=1e-10)

    def test_poincare_round_trips(self, rng):
        for kappa in KAPPAS:
            x = random_lorentz(rng, 500, 4, kappa)
            p = lorentz_to_poincare(x, kappa)
            assert np.all(is_in_ball(p, kappa))
            np.testing.assert_allclose(poincare_to_lorentz(p, kappa), x, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(klein_to_poincare(poincare_to_klein(p, kappa), kappa), p,
                                       rtol=1e-9, atol=1e-14)
            np.testing.assert_allclose(poincare_to_klein(p, kappa), lorentz_to_klein(x, kappa),
                                       rtol=1e-9, atol=1e-14)

    def test_pairwise_poincare_matches_broadcast(self, rng):
        p = lorentz_to_poincare(random_lorentz(rng, 6, 3, 1.0), 1.0)
        q = lorentz_to_poincare(random_lorentz(rng, 4, 3, 1.0), 1.0)
        np.testing.assert_allclose(pairwise_poincare_distance(p, q, 1.0),
                                   poincare_distance(p[:, None, :], q[None, :, :], 1.0), rtol=1e-9)

    def test_pairwise_poincare_near_the_boundary(self, rng):
        directions = rng.normal(size=(6, 3))
        p = (1.0 - 1e-8) * directions / np.linalg.norm(directions, axis=1, keepdims=True)
        d = pairwise_poincare_distance(p, p, 1.0)
        np.testing.assert_array_equal(np.diag(d), 0.0)
        np.testing.assert_allclose(d, poincare_distance(p[:, None, :], p[None, :, :], 1.0), rtol=1e-12)
        np.testing.assert_allclose(d, d.T, rtol=1e-12)
