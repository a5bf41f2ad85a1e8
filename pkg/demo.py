"""
Hyperbolic GCD Toolkit Demo

This script walks through the toolkit end to end:
- Geometry primitives on the Lorentz, Klein and Poincaré models
- A synthetic hierarchical dataset with a GCD split
- Toy contrastive training of free embeddings
- Semi-supervised K-Means in Euclidean, Lorentz and Poincaré space
- All/Old/New accuracy and per-level homogeneity

Nothing needs to be configured; settings from .env are picked up when present.
"""

import os
import sys
import time

import numpy as np

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from clustering import KMeansConfig, make_space, semi_supervised_kmeans
from datagen import TreeSpec, synthetic_gcd
from geometry import (
    Curvature, DEFAULT_CLIP_RADIUS, clip_euclidean, exp_map_lorentz, exp_map_klein,
    lorentz_distance, lorentz_centroid, lorentz_to_klein, einstein_midpoint, lorentz_to_poincare,
    origin, check_on_manifold,
)
from losses import LossWeights, toy_train
from metrics import EvalInput, clustering_accuracy, granularity_eval
from utils.error_handling import ErrorHandler, HypGCDError, ValidationError

KAPPA = Curvature(0.05)


def geometry_demo():
    """
    Show the exponential maps, distances and the midpoint/centroid correspondence.
    """
    print("\n" + "="*60)
    print("GEOMETRY")
    print("="*60)

    v = np.array([2.3, 0.0, 0.0])
    x = exp_map_lorentz(v, KAPPA)
    print(f"📍 exp map of {v.tolist()} onto the hyperboloid: {np.round(x, 4).tolist()}")
    print(f"   distance from the origin: {float(lorentz_distance(origin(3, KAPPA), x, KAPPA)):.6f} "
          f"(tangent norm {np.linalg.norm(v):.6f})")
    print(f"   Klein exp map: {np.round(exp_map_klein(v, KAPPA), 4).tolist()}")

    rng = np.random.default_rng(0)
    points = exp_map_lorentz(rng.normal(size=(5, 3)), KAPPA)
    centroid = lorentz_to_klein(lorentz_centroid(points, KAPPA), KAPPA)
    midpoint = einstein_midpoint(lorentz_to_klein(points, KAPPA), KAPPA)
    print(f"✓ Einstein midpoint equals the projected Lorentz centroid "
          f"(max difference {np.max(np.abs(centroid - midpoint)):.2e})")


def data_demo():
    """
    Generate a two-level class tree and split it into seen and unseen classes.

    Returns:
        SyntheticGCD: The dataset
    """
    print("\n" + "="*60)
    print("SYNTHETIC DATA")
    print("="*60)

    data = synthetic_gcd(TreeSpec(depth=2, branching=3, points_per_leaf=20, dim=8, seed=0))
    print(f"🌳 {data.points.shape[0]} points in {len(np.unique(data.labels))} leaf classes")
    print(f"   Seen classes: {sorted(data.old_classes)}")
    print(f"   Labeled points: {int(np.sum(data.is_labeled))}")
    return data


def training_demo(data):
    """
    Train the tangent embeddings with the hyperbolic contrastive loss.

    Returns:
        np.ndarray: Embeddings after the last epoch
    """
    print("\n" + "="*60)
    print("TOY TRAINING")
    print("="*60)

    start = time.time()
    result = toy_train(data.to_dataset(), epochs=40, lr=0.01, weights=LossWeights(lam=0.35),
                       seed=0, curvature=KAPPA, log_every=0)
    print(f"📉 loss {result.loss_trace[0]:.4f} -> {result.loss_trace[-1]:.4f} "
          f"(best {result.best_loss:.4f} at epoch {result.best_epoch}, {time.time() - start:.1f}s)")
    return result.embeddings


def clustering_demo(data, trained):
    """
    Cluster the raw vectors in Euclidean space and the trained ones in hyperbolic space.
    """
    print("\n" + "="*60)
    print("CLUSTERING & EVALUATION")
    print("="*60)

    dataset = data.to_dataset()
    lorentz = exp_map_lorentz(clip_euclidean(trained, DEFAULT_CLIP_RADIUS), KAPPA)
    inputs = {
        'euclidean': data.points,
        'lorentz': lorentz,
        'poincare_via_klein': lorentz_to_poincare(lorentz, KAPPA),
    }
    cfg = KMeansConfig(k=len(np.unique(data.labels)), seed=0)
    eval_mask = ~data.is_labeled

    for model, points in inputs.items():
        space = make_space(model, None if model == 'euclidean' else KAPPA)
        result = semi_supervised_kmeans(dataset.with_points(points), cfg, space)
        report = clustering_accuracy(EvalInput(result.assignments, data.labels, data.old_mask, eval_mask))
        levels = granularity_eval(result.assignments, data.level_labels, eval_mask)
        print(f"\n🔎 {model}:")
        print(f"   accuracy all={report.acc_all:.3f} old={report.acc_old:.3f} new={report.acc_new:.3f}")
        print(f"   homogeneity per level: {[round(h, 3) for h in levels]}")
        print(f"   largest cluster share: {result.largest_cluster_fraction:.3f}")


def error_handling_demo():
    """
    Show how invalid input surfaces as typed errors with exit codes.
    """
    print("\n" + "="*60)
    print("ERROR HANDLING")
    print("="*60)

    cases = [
        ("Negative curvature", lambda: Curvature(-1.0)),
        ("Point off the hyperboloid", lambda: check_on_manifold(np.array([[1.0, 5.0]]), 1.0)),
        ("Zero clusters", lambda: KMeansConfig(k=0)),
    ]
    for name, action in cases:
        try:
            action()
            print(f"✗ {name}: no error raised")
        except HypGCDError as e:
            print(f"✓ {name}: {type(e).__name__} (exit code {ErrorHandler.exit_code_for(e)}) - {e.message}")

    try:
        make_space('spherical')
    except ValidationError as e:
        print(f"✓ Unknown space: {e.message}")


def main():
    """
    Run the complete toolkit demo.
    """
    print("HYPERBOLIC GCD TOOLKIT DEMONSTRATION")
    print("="*60)
    print("This demo covers geometry, synthetic data, training,")
    print("clustering and GCD evaluation.")
    print("="*60)

    geometry_demo()
    data = data_demo()
    trained = training_demo(data)
    clustering_demo(data, trained)
    error_handling_demo()

    print("\n" + "="*60)
    print("DEMO COMPLETED SUCCESSFULLY!")
    print("="*60)
    print("Run `python -m cli --help` for the command-line interface.")


if __name__ == "__main__":
    main()
