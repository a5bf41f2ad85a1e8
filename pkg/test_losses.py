"""
Tests for the losses package: exterior angle, contrastive scores, the four
losses and their mix, analytic gradients and the toy trainer.
"""

import numpy as np
import pytest

from clustering import LabeledDataset, KMeansConfig, make_space, semi_supervised_kmeans
from datagen import TreeSpec, synthetic_gcd
from geometry import Curvature, exp_map_lorentz, clip_euclidean, origin, lorentz_distance
from losses import (
    Batch, LossWeights, PositiveIndexSets, embed, exterior_angle, score_distance, score_angle,
    loss_self_supervised, loss_supervised, loss_components, loss_total, loss_total_and_grad,
    alpha_schedule, toy_train,
)
from losses.toy_train import neighborhoods
from metrics import EvalInput, clustering_accuracy
from utils.error_handling import ValidationError, DegenerateError


def random_views(rng, n, d, scale=1.0):
    return rng.normal(size=(n, d)) * scale, rng.normal(size=(n, d)) * scale


def manual_scores(score_fn, own, partners, tau, k):
    """-log σ per anchor, candidates being the own view plus the partner."""
    out = []
    for i in range(own.shape[0]):
        candidates = np.vstack([own, partners[i:i + 1]])
        out.append(-np.log(score_fn(i, partners[i], candidates, tau, k)))
    return np.array(out)


class TestExteriorAngle:
    @pytest.mark.parametrize("kappa", [0.05, 1.0])
    def test_point_beyond_on_the_same_ray(self, kappa):
        v = np.array([0.6, -0.8, 0.0]) / np.sqrt(kappa)
        x = exp_map_lorentz(v, kappa)
        assert exterior_angle(x, exp_map_lorentz(2.0 * v, kappa), kappa) == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("kappa", [0.05, 1.0])
    def test_point_between_origin_and_anchor(self, kappa):
        v = np.array([0.6, -0.8, 0.0]) / np.sqrt(kappa)
        x = exp_map_lorentz(v, kappa)
        assert exterior_angle(x, exp_map_lorentz(0.5 * v, kappa), kappa) == pytest.approx(np.pi, abs=1e-6)

    def test_range_and_asymmetry(self, rng):
        x = exp_map_lorentz(rng.normal(size=4), 0.05)
        y = exp_map_lorentz(rng.normal(size=4) * 3.0, 0.05)
        a, b = exterior_angle(x, y, 0.05), exterior_angle(y, x, 0.05)
        assert 0.0 <= a <= np.pi and 0.0 <= b <= np.pi
        assert a != pytest.approx(b)

    def test_degenerate_inputs(self):
        x = exp_map_lorentz(np.array([1.0, 2.0]), 0.05)
        with pytest.raises(DegenerateError):
            exterior_angle(origin(2, 0.05), x, 0.05)
        with pytest.raises(DegenerateError):
            exterior_angle(x, x.copy(), 0.05)


class TestScores:
    @pytest.mark.parametrize("score_fn", [score_distance, score_angle])
    def test_scores_over_candidates_sum_to_one(self, rng, score_fn):
        emb = exp_map_lorentz(rng.normal(size=(7, 5)), 0.05)
        for i in range(7):
            total = sum(score_fn(i, emb[j], emb, 0.07, 0.05) for j in range(7) if j != i)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_distance_score_matches_definition(self, rng):
        emb = exp_map_lorentz(rng.normal(size=(5, 3)), 0.05)
        y = exp_map_lorentz(rng.normal(size=3), 0.05)
        sims = np.array([-lorentz_distance(emb[0], emb[j], 0.05) for j in range(1, 5)]) / 0.2
        expected = np.exp(-lorentz_distance(emb[0], y, 0.05) / 0.2) / np.sum(np.exp(sims))
        assert score_distance(0, y, emb, 0.2, 0.05) == pytest.approx(expected, rel=1e-10)

    def test_angle_score_matches_exterior_angle(self, rng):
        emb = exp_map_lorentz(rng.normal(size=(5, 3)), 0.05)
        y = exp_map_lorentz(rng.normal(size=3), 0.05)
        sims = np.array([np.pi - exterior_angle(emb[2], emb[j], 0.05) for j in (0, 1, 3, 4)]) / 0.2
        expected = np.exp((np.pi - exterior_angle(emb[2], y, 0.05)) / 0.2) / np.sum(np.exp(sims))
        assert score_angle(2, y, emb, 0.2, 0.05) == pytest.approx(expected, rel=1e-8)

    def test_angle_score_prefers_the_same_direction(self):
        kappa = Curvature(0.05)
        anchor = np.array([2.3, 0.0, 0.0])
        near = np.array([2.3 * np.cos(0.1), 2.3 * np.sin(0.1), 0.0])
        far = np.array([2.3 * np.cos(1.0), 2.3 * np.sin(1.0), 0.0])
        emb = exp_map_lorentz(np.stack([anchor, near, far]), kappa)
        assert score_angle(0, emb[1], emb, 0.07, kappa) > 0.5 > score_angle(0, emb[2], emb, 0.07, kappa)

    def test_single_member_batch_rejected(self):
        emb = exp_map_lorentz(np.array([[1.0, 0.0]]), 0.05)
        with pytest.raises(ValidationError):
            score_distance(0, emb[0], emb, 0.07, 0.05)

    def test_non_positive_temperature_rejected(self, rng):
        emb = exp_map_lorentz(rng.normal(size=(3, 2)), 0.05)
        with pytest.raises(ValidationError):
            score_angle(0, emb[1], emb, 0.0, 0.05)


class TestEmbed:
    def test_clipped_then_exp_mapped(self):
        batch = Batch([[3.0, 4.0]], [[0.3, 0.4]], clip_radius=2.3)
        xa, xb = embed(batch)
        np.testing.assert_allclose(xa, exp_map_lorentz([[3.0 * 2.3 / 5.0, 4.0 * 2.3 / 5.0]], 0.05), rtol=1e-14)
        np.testing.assert_array_equal(xb, exp_map_lorentz([[0.3, 0.4]], 0.05))

    def test_infinite_clip_matches_huge_radius(self, rng):
        a, b = random_views(rng, 6, 4, scale=5.0)
        unclipped = embed(Batch(a, b, clip_radius=float('inf')))
        huge = embed(Batch(a, b, clip_radius=1e9))
        for left, right in zip(unclipped, huge):
            np.testing.assert_array_equal(left, right)

    def test_batch_validation(self):
        with pytest.raises(ValidationError):
            Batch(np.zeros((2, 3)), np.zeros((3, 3)))
        with pytest.raises(ValidationError):
            Batch(np.zeros((2, 3)), np.zeros((2, 3)), tau=0.0)
        with pytest.raises(ValidationError):
            Batch(np.zeros((2, 3)), np.zeros((2, 3)), labels=[0])


class TestLosses:
    @pytest.mark.parametrize("score_fn", [score_distance, score_angle])
    def test_self_supervised_matches_per_anchor_scores(self, rng, score_fn):
        a, b = random_views(rng, 6, 4)
        batch = Batch(a, b, tau=0.3)
        xa, xb = embed(batch)
        k = batch.curvature
        expected = np.mean(np.concatenate([manual_scores(score_fn, xa, xb, 0.3, k),
                                           manual_scores(score_fn, xb, xa, 0.3, k)]))
        assert loss_self_supervised(score_fn, batch) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("score_fn", [score_distance, score_angle])
    def test_supervised_matches_per_anchor_scores(self, rng, score_fn):
        a, b = random_views(rng, 6, 4)
        labels = np.array([0, 0, 1, 1, 1, -1])
        batch = Batch(a, b, labels, tau=0.3)
        xa, xb = embed(batch)
        k = batch.curvature
        labeled = np.flatnonzero(labels >= 0)
        per_anchor = []
        for own, other in ((xa, xb), (xb, xa)):
            for pos, i in enumerate(labeled):
                members = [p for p, q in enumerate(labeled) if q != i and labels[q] == labels[i]]
                if not members:
                    continue
                candidates = np.vstack([own[labeled], other[i:i + 1]])
                per_anchor.append(-np.mean([np.log(score_fn(pos, candidates[p], candidates, 0.3, k))
                                            for p in members]))
        assert loss_supervised(score_fn, batch) == pytest.approx(np.mean(per_anchor), rel=1e-9)

    def test_unlabeled_members_do_not_enter_the_supervised_loss(self, rng):
        a, b = random_views(rng, 6, 4)
        labels = np.array([0, 0, 1, 1, -1, -1])
        moved_a, moved_b = a.copy(), b.copy()
        moved_a[4:] = rng.normal(size=(2, 4)) * 3.0
        moved_b[4:] = rng.normal(size=(2, 4)) * 3.0
        for score_fn in (score_distance, score_angle):
            assert loss_supervised(score_fn, Batch(moved_a, moved_b, labels)) == pytest.approx(
                loss_supervised(score_fn, Batch(a, b, labels)), rel=1e-12)

    def test_supervised_loss_without_labels_is_zero(self, rng):
        a, b = random_views(rng, 5, 3)
        assert loss_supervised(score_distance, Batch(a, b)) == 0.0

    def test_aligned_views_score_better_than_shuffled(self, rng):
        a = rng.normal(size=(8, 6)) * 2.0
        aligned = loss_self_supervised(score_distance, Batch(a, a.copy()))
        shuffled = loss_self_supervised(score_distance, Batch(a, a[::-1].copy()))
        assert aligned < shuffled

    def test_total_is_the_weighted_mix(self, rng):
        a, b = random_views(rng, 6, 4)
        batch = Batch(a, b, [0, 0, 1, 1, -1, -1])
        c = loss_components(batch)
        alpha, lam = 0.3, 0.35
        expected = ((1 - lam) * ((1 - alpha) * c[('s', 'distance')] + alpha * c[('s', 'angle')])
                    + lam * ((1 - alpha) * c[('u', 'distance')] + alpha * c[('u', 'angle')]))
        assert loss_total(batch, LossWeights(alpha, lam)) == pytest.approx(expected, rel=1e-12)
        assert loss_total(batch, LossWeights(1.0, 1.0)) == pytest.approx(c[('u', 'angle')], rel=1e-12)
        assert loss_total(batch, LossWeights(0.0, 0.0)) == pytest.approx(c[('s', 'distance')], rel=1e-12)
        assert c[('u', 'distance')] == pytest.approx(loss_self_supervised(score_distance, batch), rel=1e-12)

    @pytest.mark.parametrize("alpha,lam", [(1.5, 0.5), (0.5, -0.1)])
    def test_weights_outside_unit_interval_rejected(self, alpha, lam):
        with pytest.raises(ValidationError):
            LossWeights(alpha, lam)

    def test_alpha_schedule(self):
        assert alpha_schedule(0, 10) == 1.0
        assert alpha_schedule(5, 10) == pytest.approx(0.5)
        assert alpha_schedule(10, 10) == 0.0
        assert alpha_schedule(12, 10) == 0.0
        assert alpha_schedule(0, 0) == 0.0

    def test_positive_sets(self):
        labels = [0, 1, 0, -1, 0]
        positives = PositiveIndexSets.from_labels(labels)
        np.testing.assert_array_equal(positives.sets[0], [2, 4])
        assert len(positives.sets[1]) == 0
        assert len(positives.sets[3]) == 0
        positives.validate(labels)
        with pytest.raises(ValidationError):
            PositiveIndexSets((np.array([0]), np.array([], dtype=int))).validate([0, 0])
        with pytest.raises(ValidationError):
            PositiveIndexSets((np.array([1]), np.array([], dtype=int))).validate([0, 1])


def random_norm_views(rng, n, d, radius):
    """Views whose norms stay clear of the clip radius on both sides."""
    def draw():
        direction = rng.normal(size=(n, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        inner = rng.uniform(0.3, 2.0, size=n)
        outer = rng.uniform(2.6, 4.0, size=n)
        norms = np.where(rng.random(n) < 0.7, inner, outer)
        return direction * norms[:, None] * (radius / 2.3 if np.isfinite(radius) else 1.0)
    return draw(), draw()


class TestGradient:
    def test_analytic_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2024)
        h = 1e-5
        for _ in range(100):
            n = int(rng.integers(8, 33))
            d = int(rng.integers(8, 33))
            radius = float(rng.choice([2.3, np.inf]))
            kappa = float(rng.choice([0.05, 0.5]))
            tau = float(rng.uniform(0.07, 0.5))
            weights = LossWeights(float(rng.uniform()), float(rng.uniform()))
            labels = rng.integers(-1, 4, size=n)
            a, b = random_norm_views(rng, n, d, radius)

            def loss_at(va, vb):
                return loss_total(Batch(va, vb, labels, tau, radius, Curvature(kappa)), weights)

            loss, grad_a, grad_b = loss_total_and_grad(Batch(a, b, labels, tau, radius, Curvature(kappa)), weights)
            assert loss == pytest.approx(loss_at(a, b), rel=1e-12)
            scale = max(1.0, float(np.max(np.abs(grad_a))), float(np.max(np.abs(grad_b))))
            for _ in range(6):
                view = int(rng.integers(2))
                i, j = int(rng.integers(n)), int(rng.integers(d))
                plus = [a.copy(), b.copy()]
                minus = [a.copy(), b.copy()]
                plus[view][i, j] += h
                minus[view][i, j] -= h
                numeric = (loss_at(*plus) - loss_at(*minus)) / (2.0 * h)
                analytic = (grad_a, grad_b)[view][i, j]
                assert abs(numeric - analytic) <= 1e-4 * abs(numeric) + 1e-6 * scale

    def test_gradient_is_finite_for_identical_views(self, rng):
        a = rng.normal(size=(6, 4))
        _, grad_a, grad_b = loss_total_and_grad(Batch(a, a.copy(), [0, 0, 1, 1, -1, -1]), LossWeights(0.5))
        assert np.all(np.isfinite(grad_a)) and np.all(np.isfinite(grad_b))


def toy_dataset(rng, n_per_class=10, d=8):
    centers = rng.normal(size=(3, d)) * 1.5
    points = np.concatenate([c + 0.5 * rng.normal(size=(n_per_class, d)) for c in centers])
    labels = np.repeat(np.arange(3), n_per_class)
    is_labeled = np.zeros(len(labels), dtype=bool)
    is_labeled[::2] = True
    is_labeled[labels == 2] = False
    return LabeledDataset(points, labels, is_labeled, old_classes={0, 1})


class TestToyTrain:
    def test_zero_learning_rate_freezes_everything(self, rng):
        data = toy_dataset(rng)
        result = toy_train(data, epochs=5, lr=0.0, weights=LossWeights(0.5), decay_alpha=False)
        assert len(result.loss_trace) == 5
        assert len(set(result.loss_trace)) == 1
        np.testing.assert_array_equal(result.embeddings, data.points)
        assert result.best_epoch == 0

    def test_loss_decreases_with_small_steps(self, rng):
        data = toy_dataset(rng)
        result = toy_train(data, epochs=30, lr=0.001, weights=LossWeights(alpha=0.0, lam=0.5),
                           decay_alpha=False)
        assert result.loss_trace[-1] < result.loss_trace[0]
        assert result.best_epoch > 0
        assert result.best_loss == min(result.loss_trace)

    def test_mini_batches_and_no_clipping(self, rng):
        data = toy_dataset(rng)
        result = toy_train(data, epochs=4, lr=0.001, batch_size=8, clip_radius=float('inf'), seed=3)
        assert len(result.loss_trace) == 4
        assert np.all(np.isfinite(result.loss_trace))
        assert result.embeddings.shape == data.points.shape

    def test_same_seed_same_embeddings(self, rng):
        data = toy_dataset(rng)
        first = toy_train(data, epochs=3, lr=0.001, batch_size=8, seed=5)
        second = toy_train(data, epochs=3, lr=0.001, batch_size=8, seed=5)
        np.testing.assert_array_equal(first.embeddings, second.embeddings)

    @pytest.mark.parametrize("kwargs", [{'epochs': 0}, {'lr': -1.0}, {'batch_size': 1}])
    def test_invalid_settings_rejected(self, rng, kwargs):
        with pytest.raises(ValidationError):
            toy_train(toy_dataset(rng), **kwargs)

    def test_clipped_inputs_stay_within_radius(self, rng):
        data = toy_dataset(rng)
        result = toy_train(data, epochs=2, lr=0.001)
        clipped = clip_euclidean(result.embeddings, 2.3)
        assert np.all(np.linalg.norm(clipped, axis=1) <= 2.3 * (1 + 1e-12))

    @pytest.mark.parametrize("kwargs", [{'neighbors': 0}, {'neighbors': 31}, {'jitter': -0.1}])
    def test_invalid_view_settings_rejected(self, rng, kwargs):
        with pytest.raises(ValidationError):
            toy_train(toy_dataset(rng), epochs=1, **kwargs)

    def test_neighborhoods_start_with_the_point_itself(self, rng):
        data = toy_dataset(rng)
        nbrs = neighborhoods(data.points, 5)
        assert nbrs.shape == (30, 5)
        np.testing.assert_array_equal(nbrs[:, 0], np.arange(30))
        np.testing.assert_array_equal(neighborhoods(data.points, 1), np.arange(30)[:, None])
        # the toy classes are far apart compared with their spread
        assert np.all(data.labels[nbrs] == data.labels[:, None])

    def test_duplicate_points_keep_their_own_slot(self):
        points = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 6.0]])
        nbrs = neighborhoods(points, 2)
        np.testing.assert_array_equal(nbrs[:, 0], np.arange(4))
        assert nbrs[0, 1] == 1 and nbrs[1, 1] == 0

    def test_single_neighbor_without_jitter_gives_identical_views(self, rng):
        data = toy_dataset(rng)
        frozen = toy_train(data, epochs=2, lr=0.0, neighbors=1, jitter=0.0, weights=LossWeights(0.0, 1.0),
                           decay_alpha=False)
        # identical views put every partner at distance 0
        assert frozen.loss_trace[0] < np.log(len(data))

    @pytest.mark.slow
    def test_training_raises_semi_supervised_accuracy(self):
        kappa = Curvature(0.05)
        space = make_space('lorentz', kappa)

        def accuracy(data, tangent, seed):
            points = exp_map_lorentz(clip_euclidean(tangent, 2.3), kappa)
            result = semi_supervised_kmeans(data.to_dataset().with_points(points),
                                            KMeansConfig(k=data.leaf_means.shape[0], seed=seed), space)
            return clustering_accuracy(EvalInput(result.assignments, data.labels, data.old_mask,
                                                 ~data.is_labeled)).acc_all

        before, after = [], []
        for seed in range(3):
            data = synthetic_gcd(TreeSpec(seed=seed))
            trained = toy_train(data.to_dataset(), seed=seed, curvature=kappa)
            before.append(accuracy(data, data.points, seed))
            after.append(accuracy(data, trained.embeddings, seed))
        assert np.mean(after) > np.mean(before)
