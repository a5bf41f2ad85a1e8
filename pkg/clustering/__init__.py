"""
Clustering Module

Metric-space K-Means with Euclidean, Lorentz and Poincaré instantiations,
plus the semi-supervised variant used for generalized category discovery.
"""

from .dataset import LabeledDataset, UNLABELED
from .spaces import MetricSpace, make_space, SPACE_MODELS
from .kmeans import (
    KMeansConfig, ClusteringResult, kmeans, semi_supervised_kmeans, kmeanspp_init,
)

__all__ = [
    'LabeledDataset', 'UNLABELED',
    'MetricSpace', 'make_space', 'SPACE_MODELS',
    'KMeansConfig', 'ClusteringResult', 'kmeans', 'semi_supervised_kmeans', 'kmeanspp_init',
]
