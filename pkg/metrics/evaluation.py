"""
GCD evaluation: clustering accuracy (All/Old/New) and homogeneity.

Accuracy uses one optimal cluster-to-class matching over all evaluated points;
Old and New accuracies restrict that same matching to seen and unseen classes.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import homogeneity_score
from sklearn.metrics.cluster import contingency_matrix

from utils.error_handling import ValidationError

logger = logging.getLogger(__name__)


@dataclass
class EvalInput:
    """
    Predictions and ground truth for one evaluation.

    Attributes:
        predicted (np.ndarray): Cluster id per point
        truth (np.ndarray): Class id per point
        old_mask (np.ndarray): Point belongs to a seen class
        eval_mask (np.ndarray): Point is evaluated (unlabeled subset)
    """

    predicted: np.ndarray
    truth: np.ndarray
    old_mask: Optional[np.ndarray] = None
    eval_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted, dtype=np.int64)
        self.truth = np.asarray(self.truth, dtype=np.int64)
        n = self.predicted.shape[0]
        if self.old_mask is None:
            self.old_mask = np.zeros(n, dtype=bool)
        if self.eval_mask is None:
            self.eval_mask = np.ones(n, dtype=bool)
        self.old_mask = np.asarray(self.old_mask, dtype=bool)
        self.eval_mask = np.asarray(self.eval_mask, dtype=bool)
        for name in ('truth', 'old_mask', 'eval_mask'):
            if getattr(self, name).shape != (n,):
                raise ValidationError(f"{name} must have {n} entries like predicted")


@dataclass
class EvalReport:
    """
    Evaluation results.

    ``acc_old``/``acc_new`` are NaN when the evaluated set has no old/new points.
    ``contingency`` is indexed ``[cluster, class]`` in the order of
    ``cluster_ids`` and ``class_ids``.
    """

    acc_all: float
    acc_old: float
    acc_new: float
    homogeneity: float
    contingency: np.ndarray
    cluster_ids: np.ndarray
    class_ids: np.ndarray
    n_evaluated: int
    matching: Dict[int, int] = field(default_factory=dict)
    level_homogeneity: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        def number(x: float):
            return None if np.isnan(x) else float(x)

        return {
            'acc_all': number(self.acc_all),
            'acc_old': number(self.acc_old),
            'acc_new': number(self.acc_new),
            'homogeneity': number(self.homogeneity),
            'n_evaluated': self.n_evaluated,
            'cluster_ids': self.cluster_ids.tolist(),
            'class_ids': self.class_ids.tolist(),
            'contingency': self.contingency.tolist(),
            'matching': {str(k): v for k, v in self.matching.items()},
            'level_homogeneity': [number(h) for h in self.level_homogeneity],
        }


def _optimal_matching(table: np.ndarray) -> Dict[int, int]:
    """Row -> column matching maximizing matched counts on a zero-padded square table."""
    size = max(table.shape)
    padded = np.zeros((size, size))
    padded[:table.shape[0], :table.shape[1]] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return {int(r): int(c) for r, c in zip(rows, cols)
            if r < table.shape[0] and c < table.shape[1]}


def _subset_accuracy(correct: np.ndarray, mask: np.ndarray) -> float:
    if not np.any(mask):
        return float('nan')
    return float(np.mean(correct[mask]))


def clustering_accuracy(data: EvalInput) -> EvalReport:
    """
    All/Old/New clustering accuracy under the optimal cluster-to-class matching.

    Args:
        data (EvalInput): Predictions, truth and masks

    Returns:
        EvalReport: Accuracies, homogeneity and the contingency table of the
            evaluated points

    Raises:
        ValidationError: If no point is evaluated
    """
    mask = data.eval_mask
    if not np.any(mask):
        raise ValidationError("Evaluation set is empty")
    predicted = data.predicted[mask]
    truth = data.truth[mask]
    old = data.old_mask[mask]

    cluster_ids, pred_idx = np.unique(predicted, return_inverse=True)
    class_ids, true_idx = np.unique(truth, return_inverse=True)
    table = contingency_matrix(true_idx, pred_idx).T
    matching = _optimal_matching(table)

    mapped = np.full(len(cluster_ids), -1, dtype=np.int64)
    for r, c in matching.items():
        mapped[r] = c
    correct = mapped[pred_idx] == true_idx

    report = EvalReport(
        acc_all=float(np.mean(correct)),
        acc_old=_subset_accuracy(correct, old),
        acc_new=_subset_accuracy(correct, ~old),
        homogeneity=homogeneity(predicted, truth),
        contingency=table,
        cluster_ids=cluster_ids,
        class_ids=class_ids,
        n_evaluated=int(predicted.shape[0]),
        matching={int(cluster_ids[r]): int(class_ids[c]) for r, c in matching.items()},
    )
    logger.debug(f"accuracy all={report.acc_all:.4f} old={report.acc_old:.4f} new={report.acc_new:.4f}")
    return report


def homogeneity(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """
    ``1 - H(class|cluster)/H(class)`` with natural-log entropies (1.0 when H(class) = 0).

    Raises:
        ValidationError: If the inputs are empty or differ in length
    """
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape[0] == 0:
        raise ValidationError("Homogeneity needs at least one point")
    if predicted.shape != truth.shape:
        raise ValidationError("predicted and truth must have equal length")
    return float(homogeneity_score(truth, predicted))


def granularity_eval(predicted: Sequence[int], truth_levels: Sequence[Sequence[int]],
                     eval_mask: Optional[np.ndarray] = None) -> List[float]:
    """
    Homogeneity of one prediction against each label level (ordered coarse to fine).

    Args:
        predicted: Cluster id per point
        truth_levels: One full label vector per level
        eval_mask (Optional[np.ndarray]): Restrict to these points

    Returns:
        List[float]: Homogeneity per level, in the given order
    """
    predicted = np.asarray(predicted)
    mask = np.ones(predicted.shape[0], dtype=bool) if eval_mask is None else np.asarray(eval_mask, dtype=bool)
    results = []
    for level in truth_levels:
        level = np.asarray(level)
        if level.shape != predicted.shape:
            raise ValidationError("Every label level must have one entry per point")
        results.append(homogeneity(predicted[mask], level[mask]))
    return results
