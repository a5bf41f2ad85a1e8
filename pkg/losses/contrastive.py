"""
Hyperbolic contrastive losses.

Euclidean projector outputs are clipped, exp-mapped onto the hyperboloid and
scored against each other with a softmax over either the negative geodesic
distance or the exterior angle. Four losses (self-supervised/supervised ×
distance/angle) are mixed by ``alpha`` and ``lam``.

Softmax candidates for an anchor are the other members of its own view plus
its partner in the other view. Both views act as anchors. Supervised
positives are same-view, same-class members, and the supervised softmax only
runs over the labeled members of the batch.

The angle similarity is ``π - exterior angle``: it is π for a point on the
anchor's ray and falls as the two points turn apart.

``loss_total_and_grad`` returns the gradient with respect to the pre-clip
embeddings of both views.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from geometry import (
    Curvature, as_curvature, clip_euclidean, exp_map_lorentz,
    lorentz_inner, pairwise_lorentz_inner, DEFAULT_KAPPA, DEFAULT_CLIP_RADIUS,
)
from geometry.lorentz import sinhc
from utils.error_handling import ValidationError, DegenerateError

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.07
DEFAULT_LAMBDA = 0.35
# clamps for the batched exterior angle
EPS_SPACE_NORM = 1e-8
EPS_COSH_SQ = 1e-8
# clamp for the distance derivative near coincident points
EPS_DIST_GRAD = 1e-10
# below this t the derivative of sinh(t)/t uses its series
GRAD_SERIES_THRESHOLD = 1e-2


@dataclass
class Batch:
    """
    Two augmented views of a batch of projector outputs.

    Attributes:
        view_a (np.ndarray): Pre-clip embeddings z, shape ``(n, d)``
        view_b (np.ndarray): Pre-clip embeddings z', shape ``(n, d)``
        labels (Optional[np.ndarray]): Class ids, ``-1`` for unlabeled samples
        tau (float): Softmax temperature
        clip_radius (float): Euclidean clip radius (``inf`` disables clipping)
        curvature (Curvature): κ of the hyperboloid
    """

    view_a: np.ndarray
    view_b: np.ndarray
    labels: Optional[np.ndarray] = None
    tau: float = DEFAULT_TAU
    clip_radius: float = DEFAULT_CLIP_RADIUS
    curvature: Curvature = Curvature(DEFAULT_KAPPA)

    def __post_init__(self):
        self.view_a = np.atleast_2d(np.asarray(self.view_a, dtype=np.float64))
        self.view_b = np.atleast_2d(np.asarray(self.view_b, dtype=np.float64))
        if self.view_a.shape != self.view_b.shape:
            raise ValidationError(
                f"Views must have equal shape, got {self.view_a.shape} and {self.view_b.shape}"
            )
        if not self.tau > 0.0:
            raise ValidationError(f"Temperature must be positive, got {self.tau}")
        if not self.clip_radius > 0.0:
            raise ValidationError(f"Clip radius must be positive, got {self.clip_radius}")
        self.curvature = as_curvature(self.curvature)
        if self.labels is None:
            self.labels = np.full(len(self), -1, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (len(self),):
            raise ValidationError("labels must have one entry per sample")

    def __len__(self) -> int:
        return self.view_a.shape[0]


@dataclass(frozen=True)
class LossWeights:
    """``alpha`` mixes distance (0) and angle (1); ``lam`` mixes supervised (0) and self-supervised (1)."""

    alpha: float = 1.0
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        for name in ('alpha', 'lam'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class PositiveIndexSets:
    """Per-anchor indices of the other samples sharing the anchor's label."""

    sets: Tuple[np.ndarray, ...]

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> 'PositiveIndexSets':
        """Unlabeled samples (label < 0) get empty sets and are never positives."""
        labels = np.asarray(labels, dtype=np.int64)
        sets = []
        for i, label in enumerate(labels):
            if label < 0:
                sets.append(np.empty(0, dtype=np.int64))
                continue
            same = np.flatnonzero(labels == label)
            sets.append(same[same != i])
        return cls(tuple(sets))

    def validate(self, labels: Sequence[int]) -> None:
        """
        Raises:
            ValidationError: If an anchor lists itself or a different class
        """
        labels = np.asarray(labels, dtype=np.int64)
        if len(self.sets) != len(labels):
            raise ValidationError("One positive set per anchor is required")
        for i, members in enumerate(self.sets):
            if i in members:
                raise ValidationError(f"Anchor {i} is listed as its own positive")
            if len(members) and (labels[i] < 0 or np.any(labels[members] != labels[i])):
                raise ValidationError(f"Positives of anchor {i} do not share its label")

    def matrix(self) -> np.ndarray:
        """Row-normalized indicator matrix (rows of empty sets are zero)."""
        n = len(self.sets)
        weights = np.zeros((n, n))
        for i, members in enumerate(self.sets):
            if len(members):
                weights[i, members] = 1.0 / len(members)
        return weights


def embed(batch: Batch) -> Tuple[np.ndarray, np.ndarray]:
    """Clip and exp-map both views onto the hyperboloid."""
    k = batch.curvature
    return (exp_map_lorentz(clip_euclidean(batch.view_a, batch.clip_radius), k),
            exp_map_lorentz(clip_euclidean(batch.view_b, batch.clip_radius), k))


def _distance_similarity(x: np.ndarray, y: np.ndarray, k: Curvature) -> np.ndarray:
    arg = np.maximum(-k.kappa * pairwise_lorentz_inner(x, y), 1.0)
    return -np.arccosh(arg) / k.sqrt


def _angle_terms(x: np.ndarray, y: np.ndarray, k: Curvature) -> dict:
    c = k.kappa * pairwise_lorentz_inner(x, y)
    rho = np.maximum(np.linalg.norm(x[:, 1:], axis=1), EPS_SPACE_NORM)
    s_sq = np.maximum(c * c - 1.0, EPS_COSH_SQ)
    denom = rho[:, None] * np.sqrt(s_sq)
    numer = y[None, :, 0] + x[:, None, 0] * c
    return {'c': c, 'rho': rho, 's_sq': s_sq, 'denom': denom, 'ratio': numer / denom}


def _angle_similarity(x: np.ndarray, y: np.ndarray, k: Curvature) -> np.ndarray:
    return np.pi - np.arccos(np.clip(_angle_terms(x, y, k)['ratio'], -1.0, 1.0))


def exterior_angle(x, y, k) -> float:
    """
    Exterior angle at ``x`` of the geodesic triangle (origin, x, y).

    ``arccos((y_time + x_time·κ<x,y>) / (‖x_space‖·√((κ<x,y>)² - 1)))``.
    It is 0 when ``y`` lies beyond ``x`` on the ray from the origin and π when
    ``y`` lies between the origin and ``x``. Not symmetric in its arguments.

    Raises:
        DegenerateError: If ``x`` is the origin or the points coincide
    """
    k = as_curvature(k)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rho = float(np.linalg.norm(x[1:]))
    if rho <= 0.0:
        raise DegenerateError("Exterior angle is undefined at the origin")
    c = k.kappa * float(lorentz_inner(x, y))
    if -c - 1.0 <= 1e-12:
        raise DegenerateError("Exterior angle is undefined for coincident points")
    ratio = (y[0] + x[0] * c) / (rho * np.sqrt(c * c - 1.0))
    return float(np.arccos(np.clip(ratio, -1.0, 1.0)))


@dataclass(frozen=True)
class ScoreFunction:
    """
    Softmax contrastive score over a pairwise similarity.

    Calling it as ``score(i, y, embeddings, tau, k)`` returns
    ``exp(sim(z_i, y)/τ) / Σ_{n≠i} exp(sim(z_i, z_n)/τ)``.
    ``score_distance`` uses the negative geodesic distance and ``score_angle``
    uses π minus the exterior angle.
    """

    name: str
    similarity: Callable[[np.ndarray, np.ndarray, Curvature], np.ndarray]

    def __call__(self, i: int, y, embeddings, tau: float, k=DEFAULT_KAPPA) -> float:
        k = as_curvature(k)
        embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
        if embeddings.shape[0] < 2:
            raise ValidationError("A contrastive score needs at least two batch members")
        if not tau > 0.0:
            raise ValidationError(f"Temperature must be positive, got {tau}")
        anchor = embeddings[i:i + 1]
        sims = self.similarity(anchor, embeddings, k)[0] / tau
        positive = self.similarity(anchor, np.atleast_2d(y), k)[0, 0] / tau
        others = np.delete(sims, i)
        return float(np.exp(positive - logsumexp(others)))


score_distance = ScoreFunction('distance', _distance_similarity)
score_angle = ScoreFunction('angle', _angle_similarity)


def _candidate_mask(n: int) -> np.ndarray:
    """Own view minus self, plus the partner in the other view."""
    block = ~np.eye(n, dtype=bool)
    mask = np.zeros((2 * n, 2 * n), dtype=bool)
    mask[:n, :n] = block
    mask[n:, n:] = block
    idx = np.arange(n)
    mask[idx, idx + n] = True
    mask[idx + n, idx] = True
    return mask


def _supervised_mask(labels: np.ndarray) -> np.ndarray:
    """Candidate mask restricted to labeled anchors and labeled candidates."""
    labeled = np.tile(np.asarray(labels) >= 0, 2)
    return _candidate_mask(len(labels)) & labeled[:, None] & labeled[None, :]


def _partner_matrix(n: int) -> np.ndarray:
    targets = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    targets[idx, idx + n] = 1.0
    targets[idx + n, idx] = 1.0
    return targets


def _supervised_matrix(positives: PositiveIndexSets) -> np.ndarray:
    single = positives.matrix()
    n = single.shape[0]
    targets = np.zeros((2 * n, 2 * n))
    targets[:n, :n] = single
    targets[n:, n:] = single
    return targets


def _contrastive_term(sims: np.ndarray, mask: np.ndarray, targets: np.ndarray,
                      tau: float) -> Tuple[float, np.ndarray]:
    """
    Mean over active anchors of ``LSE_a - Σ_b targets[a,b]·sims[a,b]/τ``.

    Returns the loss and its derivative with respect to ``sims``.
    """
    active = targets.sum(axis=1) > 0.0
    if not np.any(active):
        return 0.0, np.zeros_like(sims)
    # positives are candidates, so every active row has a finite LSE
    rows, weights, candidates = sims[active], targets[active], mask[active]
    logits = np.where(candidates, rows / tau, -np.inf)
    lse = logsumexp(logits, axis=1)
    per_anchor = lse - np.sum(np.where(weights > 0.0, weights * rows, 0.0), axis=1) / tau
    count = int(np.count_nonzero(active))
    loss = float(np.sum(per_anchor) / count)
    grad = np.zeros_like(sims)
    softmax = np.where(candidates, np.exp(logits - lse[:, None]), 0.0)
    grad[active] = (softmax - weights) / (tau * count)
    return loss, grad


def _stacked(batch: Batch) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = np.vstack([batch.view_a, batch.view_b])
    v = clip_euclidean(z, batch.clip_radius)
    return z, v, exp_map_lorentz(v, batch.curvature)


def loss_self_supervised(score_fn: ScoreFunction, batch: Batch) -> float:
    """Mean over both views' anchors of ``-log σ(i, partner view of i)``."""
    _, _, x = _stacked(batch)
    n = len(batch)
    sims = score_fn.similarity(x, x, batch.curvature)
    loss, _ = _contrastive_term(sims, _candidate_mask(n), _partner_matrix(n), batch.tau)
    return loss


def loss_supervised(score_fn: ScoreFunction, batch: Batch,
                    positives: Optional[PositiveIndexSets] = None) -> float:
    """
    Mean over anchors with positives of ``-(1/|N(i)|) Σ_q log σ(i, z_q)``.

    The softmax of a labeled anchor runs over the other labeled members of its
    view plus its partner. Anchors without positives are skipped; the loss is 0
    when none remain.
    """
    if positives is None:
        positives = PositiveIndexSets.from_labels(batch.labels)
    positives.validate(batch.labels)
    _, _, x = _stacked(batch)
    sims = score_fn.similarity(x, x, batch.curvature)
    loss, _ = _contrastive_term(sims, _supervised_mask(batch.labels), _supervised_matrix(positives),
                                batch.tau)
    return loss


def _components(batch: Batch, positives: PositiveIndexSets, x: np.ndarray) -> dict:
    n = len(batch)
    k = batch.curvature
    mask = _candidate_mask(n)
    labeled_mask = _supervised_mask(batch.labels)
    partner = _partner_matrix(n)
    supervised = _supervised_matrix(positives)
    sims = {'distance': _distance_similarity(x, x, k), 'angle': _angle_similarity(x, x, k)}
    out = {}
    for kind, s in sims.items():
        out[('u', kind)] = _contrastive_term(s, mask, partner, batch.tau)
        out[('s', kind)] = _contrastive_term(s, labeled_mask, supervised, batch.tau)
    return out


def _mix(weights: LossWeights) -> dict:
    a, lam = weights.alpha, weights.lam
    return {
        ('s', 'distance'): (1.0 - lam) * (1.0 - a),
        ('s', 'angle'): (1.0 - lam) * a,
        ('u', 'distance'): lam * (1.0 - a),
        ('u', 'angle'): lam * a,
    }


def loss_components(batch: Batch) -> dict:
    """All four losses keyed by ``('s'|'u', 'distance'|'angle')``."""
    _, _, x = _stacked(batch)
    positives = PositiveIndexSets.from_labels(batch.labels)
    return {key: value[0] for key, value in _components(batch, positives, x).items()}


def loss_total(batch: Batch, weights: LossWeights) -> float:
    """``(1-λ)[(1-α)L^s_D + αL^s_A] + λ[(1-α)L^u_D + αL^u_A]``."""
    components = loss_components(batch)
    return float(sum(coeff * components[key] for key, coeff in _mix(weights).items()))


def alpha_schedule(step: int, total_steps: int) -> float:
    """Linear decay of alpha from 1 at step 0 to 0 at ``total_steps``."""
    if total_steps <= 0:
        return 0.0
    return float(min(max(1.0 - step / total_steps, 0.0), 1.0))


def _distance_backward(grad_sims: np.ndarray, x: np.ndarray, k: Curvature) -> np.ndarray:
    # d(-dist)/dx_a = √κ/√(u²-1) · J x_b with J = diag(-1, 1, ..., 1)
    u = np.maximum(-k.kappa * pairwise_lorentz_inner(x, x), 1.0)
    w = grad_sims * k.sqrt / np.sqrt(np.maximum(u * u - 1.0, EPS_DIST_GRAD))
    jx = x.copy()
    jx[:, 0] = -jx[:, 0]
    return w @ jx + w.T @ jx


def _angle_backward(grad_sims: np.ndarray, x: np.ndarray, k: Curvature) -> np.ndarray:
    t = _angle_terms(x, x, k)
    c, rho, s_sq, denom, ratio = t['c'], t['rho'], t['s_sq'], t['denom'], t['ratio']
    inside = np.abs(ratio) < 1.0
    d_angle = np.where(inside, 1.0 / np.sqrt(np.where(inside, 1.0 - ratio * ratio, 1.0)), 0.0)
    p = grad_sims * d_angle
    dr_dc = x[:, None, 0] / denom - ratio * c / s_sq
    q = p * dr_dc * k.kappa
    jx = x.copy()
    jx[:, 0] = -jx[:, 0]
    grad = q @ jx + q.T @ jx
    grad[:, 0] += np.sum(p * c / denom, axis=1) + np.sum(p / denom, axis=0)
    grad[:, 1:] -= (np.sum(p * ratio, axis=1) / (rho * rho))[:, None] * x[:, 1:]
    return grad


def _sinhc_slope(t: np.ndarray) -> np.ndarray:
    """``(d/dt)(sinh(t)/t) / t``."""
    small = t < GRAD_SERIES_THRESHOLD
    safe = np.where(small, 1.0, t)
    t2 = t * t
    exact = (safe * np.cosh(safe) - np.sinh(safe)) / safe ** 3
    return np.where(small, 1.0 / 3.0 + t2 / 30.0 + t2 * t2 / 840.0, exact)


def _exp_map_backward(grad_x: np.ndarray, v: np.ndarray, k: Curvature) -> np.ndarray:
    t = k.sqrt * np.linalg.norm(v, axis=1)
    f = sinhc(t)
    g0 = grad_x[:, 0]
    gs = grad_x[:, 1:]
    radial = np.sum(v * gs, axis=1)
    return ((g0 * f * k.sqrt)[:, None] * v + f[:, None] * gs
            + (k.kappa * _sinhc_slope(t) * radial)[:, None] * v)


def _clip_backward(grad_v: np.ndarray, z: np.ndarray, r: float) -> np.ndarray:
    if np.isinf(r):
        return grad_v
    norms = np.linalg.norm(z, axis=1)
    clipped = norms > r
    if not np.any(clipped):
        return grad_v
    out = grad_v.copy()
    unit = z[clipped] / norms[clipped][:, None]
    g = grad_v[clipped]
    out[clipped] = (r / norms[clipped])[:, None] * (g - unit * np.sum(unit * g, axis=1)[:, None])
    return out


def loss_total_and_grad(batch: Batch, weights: LossWeights) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Total loss and its gradient with respect to ``view_a`` and ``view_b``.

    At ``‖z‖ == clip_radius`` the unclipped (identity) branch is used.

    Returns:
        Tuple[float, np.ndarray, np.ndarray]: loss, d loss/d view_a, d loss/d view_b
    """
    z, v, x = _stacked(batch)
    k = batch.curvature
    positives = PositiveIndexSets.from_labels(batch.labels)
    components = _components(batch, positives, x)
    mix = _mix(weights)

    loss = 0.0
    grad_sims = {'distance': np.zeros((x.shape[0], x.shape[0])),
                 'angle': np.zeros((x.shape[0], x.shape[0]))}
    for key, coeff in mix.items():
        value, grad = components[key]
        loss += coeff * value
        grad_sims[key[1]] += coeff * grad

    grad_x = (_distance_backward(grad_sims['distance'], x, k)
              + _angle_backward(grad_sims['angle'], x, k))
    grad_z = _clip_backward(_exp_map_backward(grad_x, v, k), z, batch.clip_radius)
    n = len(batch)
    return float(loss), grad_z[:n], grad_z[n:]
