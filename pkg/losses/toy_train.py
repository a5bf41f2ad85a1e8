"""
Gradient descent on free embeddings through clip -> exp map -> contrastive loss.

Every sample owns a trainable tangent vector. Its first view is the vector
plus a Gaussian jitter; its second view is the jittered mean of its
``neighbors`` nearest input points (itself included), so the self-supervised
pair pulls a sample towards its neighbourhood. With ``neighbors=1`` both views
are plain jitters of the sample. Jitter and neighbourhoods are fixed per run.
Only labels of labeled samples reach the supervised losses.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from sklearn.neighbors import NearestNeighbors

from clustering.dataset import LabeledDataset
from geometry import Curvature, as_curvature, DEFAULT_KAPPA, DEFAULT_CLIP_RADIUS
from losses.contrastive import (
    Batch, LossWeights, loss_total_and_grad, alpha_schedule, DEFAULT_TAU,
)
from utils.error_handling import DivergenceError, require

logger = logging.getLogger(__name__)

DEFAULT_EPOCHS = 200
DEFAULT_LR = 0.01
DEFAULT_JITTER = 0.01
DEFAULT_NEIGHBORS = 8


@dataclass
class TrainResult:
    """
    Outcome of ``toy_train``.

    Attributes:
        embeddings (np.ndarray): Tangent vectors after the last update
        best_embeddings (np.ndarray): Tangent vectors at the lowest loss
        loss_trace (List[float]): Loss per epoch, before that epoch's update
        best_epoch (int): Epoch with the lowest loss
    """

    embeddings: np.ndarray
    best_embeddings: np.ndarray
    loss_trace: List[float] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_loss(self) -> float:
        return self.loss_trace[self.best_epoch]


def neighborhoods(points: np.ndarray, neighbors: int) -> np.ndarray:
    """
    Indices of the ``neighbors`` nearest points of every row, the row first.

    Returns:
        np.ndarray: Integer array of shape ``(n, neighbors)``
    """
    points = np.asarray(points, dtype=np.float64)
    if neighbors == 1:
        return np.arange(points.shape[0])[:, None]
    knn = NearestNeighbors(n_neighbors=neighbors).fit(points)
    _, indices = knn.kneighbors(points)
    # duplicates may push a row out of its own first slot
    own = np.arange(points.shape[0])
    misplaced = indices[:, 0] != own
    if np.any(misplaced):
        for i in np.flatnonzero(misplaced):
            rest = [j for j in indices[i] if j != i][:neighbors - 1]
            indices[i] = [i] + rest
    return indices


def toy_train(dataset: LabeledDataset, epochs: int = DEFAULT_EPOCHS, lr: float = DEFAULT_LR,
              weights: Optional[LossWeights] = None, seed: int = 0, *,
              tau: float = DEFAULT_TAU, clip_radius: float = DEFAULT_CLIP_RADIUS,
              curvature: Curvature = Curvature(DEFAULT_KAPPA), jitter: float = DEFAULT_JITTER,
              neighbors: int = DEFAULT_NEIGHBORS, decay_alpha: bool = True,
              batch_size: Optional[int] = None, log_every: int = 20) -> TrainResult:
    """
    Train free tangent embeddings with the hyperbolic contrastive loss.

    Each update is ``z <- z - lr * b * dL/dz`` for a batch of ``b`` samples,
    so ``lr`` is a per-sample step size. The second view of a batch member
    averages the current vectors of its neighbourhood, which may reach outside
    the batch; those vectors receive their share of the gradient too.

    Args:
        dataset (LabeledDataset): Tangent-space points with labels and split
        epochs (int): Passes over the data
        lr (float): Per-sample step size (0 freezes the embeddings)
        weights (Optional[LossWeights]): ``lam`` always applies; ``alpha`` only
            when ``decay_alpha`` is False
        seed (int): Seed for view jitter and batch order
        tau (float): Softmax temperature
        clip_radius (float): Euclidean clip radius (``inf`` disables clipping)
        curvature (Curvature): κ of the hyperboloid
        jitter (float): Standard deviation of the view jitter
        neighbors (int): Neighbourhood size of the second view (1 for plain jitter)
        decay_alpha (bool): Decay alpha linearly from 1 to 0 over the epochs
        batch_size (Optional[int]): Mini-batch size; full batch when omitted
        log_every (int): Log the loss every this many epochs

    Returns:
        TrainResult: Final and best-loss embeddings plus the loss trace

    Raises:
        ValidationError: For invalid settings
        DivergenceError: If the loss becomes non-finite
    """
    require(epochs >= 1, f"epochs must be >= 1, got {epochs}")
    require(lr >= 0.0, f"lr must be non-negative, got {lr}")
    require(jitter >= 0.0, f"jitter must be non-negative, got {jitter}")
    require(batch_size is None or batch_size >= 2, f"batch_size must be >= 2, got {batch_size}")
    weights = weights or LossWeights()
    curvature = as_curvature(curvature)

    rng = np.random.default_rng(seed)
    z = np.array(dataset.points, dtype=np.float64)
    n = z.shape[0]
    require(n >= 2, "Training needs at least two samples")
    require(1 <= neighbors <= n, f"neighbors must lie in [1, {n}], got {neighbors}")
    nbrs = neighborhoods(z, neighbors)
    jitter_a = rng.normal(0.0, jitter, size=z.shape)
    jitter_b = rng.normal(0.0, jitter, size=z.shape)
    visible = np.where(dataset.is_labeled, dataset.labels, -1)

    trace: List[float] = []
    best = z.copy()
    best_epoch = 0
    step = 0
    for epoch in range(epochs):
        alpha = alpha_schedule(epoch, max(epochs - 1, 1)) if decay_alpha else weights.alpha
        epoch_weights = LossWeights(alpha, weights.lam)
        if batch_size is None or batch_size >= n:
            batches = [np.arange(n)]
        else:
            order = rng.permutation(n)
            batches = [order[s:s + batch_size] for s in range(0, n, batch_size)]
            batches = [b for b in batches if len(b) >= 2]

        snapshot = z.copy()
        epoch_loss = 0.0
        for idx in batches:
            view_b = z[nbrs[idx]].mean(axis=1) + jitter_b[idx]
            batch = Batch(z[idx] + jitter_a[idx], view_b, visible[idx], tau, clip_radius, curvature)
            loss, grad_a, grad_b = loss_total_and_grad(batch, epoch_weights)
            if not np.isfinite(loss) or not (np.all(np.isfinite(grad_a)) and np.all(np.isfinite(grad_b))):
                raise DivergenceError("Training loss became non-finite", step)
            grad = np.zeros_like(z)
            grad[idx] += grad_a
            np.add.at(grad, nbrs[idx], np.repeat(grad_b[:, None, :] / neighbors, neighbors, axis=1))
            z -= lr * len(idx) * grad
            epoch_loss += loss * len(idx)
            step += 1
        epoch_loss /= sum(len(b) for b in batches)
        trace.append(epoch_loss)

        if epoch_loss < trace[best_epoch]:
            best, best_epoch = snapshot, epoch
        if log_every and (epoch % log_every == 0 or epoch == epochs - 1):
            logger.info(f"epoch {epoch}: loss={epoch_loss:.6f} alpha={alpha:.3f}")

    return TrainResult(z, best, trace, best_epoch)
