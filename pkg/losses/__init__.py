"""
Losses Module

Hyperbolic distance- and angle-based contrastive losses, their analytic
gradients, and a toy trainer over free embeddings.
"""

from .contrastive import (
    Batch, LossWeights, PositiveIndexSets, ScoreFunction,
    embed, exterior_angle, score_distance, score_angle,
    loss_self_supervised, loss_supervised, loss_components, loss_total,
    loss_total_and_grad, alpha_schedule, DEFAULT_TAU, DEFAULT_LAMBDA,
)
from .toy_train import toy_train, TrainResult

__all__ = [
    'Batch', 'LossWeights', 'PositiveIndexSets', 'ScoreFunction',
    'embed', 'exterior_angle', 'score_distance', 'score_angle',
    'loss_self_supervised', 'loss_supervised', 'loss_components', 'loss_total',
    'loss_total_and_grad', 'alpha_schedule', 'DEFAULT_TAU', 'DEFAULT_LAMBDA',
    'toy_train', 'TrainResult',
]
