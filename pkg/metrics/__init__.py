"""
Metrics Module

Clustering accuracy (All/Old/New) and homogeneity for GCD evaluation.
"""

from .evaluation import (
    EvalInput, EvalReport, clustering_accuracy, homogeneity, granularity_eval,
)

__all__ = ['EvalInput', 'EvalReport', 'clustering_accuracy', 'homogeneity', 'granularity_eval']
