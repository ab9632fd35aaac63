"""Triplet ranking embeddings for one-shot recognition.

The heavy lifting lives in the C++ core; this package re-exports the
bound surface: the embedding model, the training losses, nearest
neighbour prediction and PCA projection.
"""

from ._core import (
    Model,
    TripletnetError,
    affine_augment,
    batch_triplet_loss,
    class_distribution,
    embedding_regularizer,
    lr_schedule,
    make_glyph_dataset,
    pca_project,
    predict_nn,
    total_loss,
    triplet_loss,
)

__all__ = [
    "Model",
    "TripletnetError",
    "affine_augment",
    "batch_triplet_loss",
    "class_distribution",
    "embedding_regularizer",
    "lr_schedule",
    "make_glyph_dataset",
    "pca_project",
    "predict_nn",
    "total_loss",
    "triplet_loss",
]
