"""
CLI Module

Subcommands for synthetic data, clustering, evaluation, toy training and
ablations, with their file formats and run manifests.
"""

from .embedding_file import (
    EmbeddingHeader, EmbeddingData, EmbeddingReader,
    read_embeddings, write_embeddings, read_assignments, write_assignments,
)
from .manifest import RunManifest
from .main import main

__all__ = [
    'EmbeddingHeader', 'EmbeddingData', 'EmbeddingReader',
    'read_embeddings', 'write_embeddings', 'read_assignments', 'write_assignments',
    'RunManifest', 'main',
]
