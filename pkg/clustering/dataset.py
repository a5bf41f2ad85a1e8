"""
Labeled dataset for generalized category discovery.

A point is either in the labeled subset (its class is known and seen) or in
the unlabeled subset, which mixes seen (old) and unseen (new) classes.
"""

from dataclasses import dataclass, field
from typing import Optional, FrozenSet

import numpy as np

from utils.error_handling import ValidationError

UNLABELED = -1


@dataclass
class LabeledDataset:
    """
    Points with optional class labels and a GCD split.

    Attributes:
        points (np.ndarray): Embeddings, shape ``(n, d)`` in the model's coordinates
        labels (Optional[np.ndarray]): Class id per point (``-1`` when unknown)
        is_labeled (np.ndarray): Membership in the labeled subset
        old_classes (FrozenSet[int]): Seen classes
        labeled_classes (Optional[FrozenSet[int]]): Classes that must own a
            cluster; derived from the labeled points when omitted
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    is_labeled: Optional[np.ndarray] = None
    old_classes: FrozenSet[int] = field(default_factory=frozenset)
    labeled_classes: Optional[FrozenSet[int]] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValidationError(f"points must be 2-D, got shape {self.points.shape}")
        n = self.points.shape[0]
        if self.labels is None:
            self.labels = np.full(n, UNLABELED, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.is_labeled is None:
            self.is_labeled = np.zeros(n, dtype=bool)
        self.is_labeled = np.asarray(self.is_labeled, dtype=bool)
        if self.labels.shape != (n,) or self.is_labeled.shape != (n,):
            raise ValidationError("labels and is_labeled must have one entry per point")
        if np.any(self.labels[self.is_labeled] < 0):
            raise ValidationError("Every labeled point needs a class label")
        self.old_classes = frozenset(int(c) for c in self.old_classes)
        if self.labeled_classes is not None:
            self.labeled_classes = frozenset(int(c) for c in self.labeled_classes)
        unknown_old = self.old_classes - set(self.class_ids.tolist())
        if unknown_old:
            raise ValidationError(f"Old classes {sorted(unknown_old)} do not occur in labels")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def class_ids(self) -> np.ndarray:
        """Sorted ids of all known classes."""
        return np.unique(self.labels[self.labels >= 0])

    @property
    def seen_classes(self) -> np.ndarray:
        """Sorted classes that own a constrained cluster."""
        if self.labeled_classes is not None:
            return np.array(sorted(self.labeled_classes), dtype=np.int64)
        return np.unique(self.labels[self.is_labeled])

    @property
    def old_mask(self) -> np.ndarray:
        """Per point: belongs to a seen class."""
        return np.isin(self.labels, list(self.old_classes))

    @property
    def eval_mask(self) -> np.ndarray:
        """Per point: member of the unlabeled subset."""
        return ~self.is_labeled

    def with_points(self, points: np.ndarray) -> 'LabeledDataset':
        """Same labels and split over new coordinates."""
        return LabeledDataset(points, self.labels.copy(), self.is_labeled.copy(),
                              self.old_classes, self.labeled_classes)
