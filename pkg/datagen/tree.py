"""
Synthetic hierarchical data for GCD experiments.

A tree of class means is grown by a random walk in tangent space: every child
mean is its parent's mean plus Gaussian noise whose scale shrinks with depth.
Samples are drawn around the leaf means, so leaves are the fine classes and
their ancestors the coarser levels.
"""

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from clustering.dataset import LabeledDataset
from utils.error_handling import ValidationError

logger = logging.getLogger(__name__)

DISPERSION_DECAY = 0.3


def default_dispersion(depth: int) -> Tuple[float, ...]:
    """``1, 0.3, 0.09, ...``: one scale per level plus one for the samples."""
    return tuple(DISPERSION_DECAY ** level for level in range(depth + 1))


@dataclass(frozen=True)
class TreeSpec:
    """
    Shape of the synthetic class tree.

    Attributes:
        depth (int): Number of levels below the root (>= 1)
        branching (Union[int, Tuple[int, ...]]): Children per node, one value for
            every level or one per level
        points_per_leaf (int): Samples drawn per leaf class
        dispersion (Optional[Tuple[float, ...]]): ``depth + 1`` strictly decreasing
            scales (``default_dispersion`` when omitted);
            entry ``l`` spreads the level ``l + 1`` means, the last spreads the samples
        dim (int): Tangent-space dimension
        seed (int): Seed of the generator
    """

    depth: int = 2
    branching: Union[int, Tuple[int, ...]] = 3
    points_per_leaf: int = 40
    dispersion: Optional[Tuple[float, ...]] = None
    dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ValidationError(f"depth must be >= 1, got {self.depth}")
        if self.dispersion is None:
            object.__setattr__(self, 'dispersion', default_dispersion(self.depth))
        object.__setattr__(self, 'dispersion', tuple(float(s) for s in self.dispersion))
        if self.points_per_leaf < 1:
            raise ValidationError(f"points_per_leaf must be >= 1, got {self.points_per_leaf}")
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        if any(b < 2 for b in self.branching_per_level):
            raise ValidationError(f"branching must be >= 2 everywhere, got {self.branching}")
        if len(self.dispersion) != self.depth + 1:
            raise ValidationError(
                f"dispersion needs depth + 1 = {self.depth + 1} values, got {len(self.dispersion)}")
        if any(not np.isfinite(s) or s <= 0.0 for s in self.dispersion):
            raise ValidationError("dispersion values must be positive and finite")
        if any(a <= b for a, b in zip(self.dispersion, self.dispersion[1:])):
            raise ValidationError("dispersion must be strictly decreasing with depth")

    @property
    def branching_per_level(self) -> Tuple[int, ...]:
        if isinstance(self.branching, int):
            return (self.branching,) * self.depth
        if len(self.branching) != self.depth:
            raise ValidationError(f"branching needs {self.depth} values, got {len(self.branching)}")
        return tuple(int(b) for b in self.branching)

    @property
    def n_leaves(self) -> int:
        return int(np.prod(self.branching_per_level))


@dataclass
class SyntheticGCD:
    """
    Generated points with their labels at every tree level.

    Attributes:
        points (np.ndarray): Tangent vectors, shape (N, dim)
        level_labels (np.ndarray): Shape (depth, N); row 0 is the coarsest level,
            the last row the leaf classes
        leaf_means (np.ndarray): Mean of each leaf class, shape (leaves, dim)
        is_labeled (np.ndarray): Labeled-subset membership
        old_classes (FrozenSet[int]): Seen leaf classes
    """

    points: np.ndarray
    level_labels: np.ndarray
    leaf_means: np.ndarray
    is_labeled: np.ndarray = None
    old_classes: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.is_labeled is None:
            self.is_labeled = np.zeros(self.points.shape[0], dtype=bool)

    @property
    def labels(self) -> np.ndarray:
        """Leaf (finest) class per point."""
        return self.level_labels[-1]

    @property
    def old_mask(self) -> np.ndarray:
        return np.isin(self.labels, list(self.old_classes))

    def to_dataset(self) -> LabeledDataset:
        return LabeledDataset(self.points, self.labels, self.is_labeled, frozenset(self.old_classes))


@dataclass(frozen=True)
class GCDSplit:
    """Seen classes and labeled samples of a GCD split."""

    old_classes: FrozenSet[int]
    is_labeled: np.ndarray


def generate_tree(spec: TreeSpec) -> SyntheticGCD:
    """
    Sample a hierarchical dataset.

    Points are ordered leaf by leaf; leaf ``i`` holds points
    ``i * points_per_leaf`` up to ``(i + 1) * points_per_leaf``.

    Args:
        spec (TreeSpec): Tree shape and seed

    Returns:
        SyntheticGCD: Points and labels; no split applied yet

    Example:
        >>> data = generate_tree(TreeSpec(depth=2, branching=2, points_per_leaf=5))
        >>> data.level_labels.shape
        (2, 20)
    """
    rng = np.random.default_rng(spec.seed)
    means = np.zeros((1, spec.dim))
    for level, width in enumerate(spec.branching_per_level):
        parents = np.repeat(means, width, axis=0)
        means = parents + rng.normal(0.0, spec.dispersion[level], size=parents.shape)

    leaves = means.shape[0]
    centers = np.repeat(means, spec.points_per_leaf, axis=0)
    points = centers + rng.normal(0.0, spec.dispersion[-1], size=centers.shape)

    leaf_of_point = np.repeat(np.arange(leaves), spec.points_per_leaf)
    level_labels = np.empty((spec.depth, points.shape[0]), dtype=np.int64)
    below = 1
    for level in range(spec.depth - 1, -1, -1):
        level_labels[level] = leaf_of_point // below
        below *= spec.branching_per_level[level]

    logger.info(f"Generated {points.shape[0]} points in {leaves} leaf classes "
                f"(depth={spec.depth}, dim={spec.dim})")
    return SyntheticGCD(points, level_labels, means)


def make_gcd_split(labels: Sequence[int], old_fraction: float = 0.5,
                   labeled_fraction: float = 0.5, seed: int = 0) -> GCDSplit:
    """
    Choose seen classes and label a fraction of their samples.

    ``floor(old_fraction * classes)`` classes become old (at least one when the
    fraction is positive). Within every old class ``floor(labeled_fraction * size)``
    samples are labeled; new-class samples never are.

    Args:
        labels: Class per point (at least two classes)
        old_fraction (float): Share of classes that are seen, in [0, 1]
        labeled_fraction (float): Share of each seen class that is labeled, in [0, 1]
        seed (int): Seed of the class and sample choice

    Returns:
        GCDSplit: The seen classes and the labeled mask

    Raises:
        ValidationError: For fewer than two classes or fractions outside [0, 1]
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.shape[0] < 2:
        raise ValidationError("A GCD split needs at least two classes")
    for name, value in (('old_fraction', old_fraction), ('labeled_fraction', labeled_fraction)):
        if not 0.0 <= value <= 1.0:
            raise ValidationError(f"{name} must be in [0, 1], got {value}")

    rng = np.random.default_rng(seed)
    n_old = int(np.floor(old_fraction * classes.shape[0]))
    if old_fraction > 0.0:
        n_old = max(n_old, 1)
    old = np.sort(rng.choice(classes, size=n_old, replace=False)) if n_old else np.array([], dtype=labels.dtype)

    is_labeled = np.zeros(labels.shape[0], dtype=bool)
    for c in old:
        members = np.flatnonzero(labels == c)
        n_labeled = int(np.floor(labeled_fraction * members.shape[0]))
        if n_labeled:
            is_labeled[rng.choice(members, size=n_labeled, replace=False)] = True

    return GCDSplit(frozenset(int(c) for c in old), is_labeled)


def synthetic_gcd(spec: TreeSpec, old_fraction: float = 0.5,
                  labeled_fraction: float = 0.5) -> SyntheticGCD:
    """Generate a tree dataset and apply a GCD split with the tree's seed."""
    data = generate_tree(spec)
    split = make_gcd_split(data.labels, old_fraction, labeled_fraction, spec.seed)
    data.is_labeled = split.is_labeled
    data.old_classes = split.old_classes
    return data


def level_names(depth: int) -> List[str]:
    return [f"level{i + 1}" for i in range(depth)]
