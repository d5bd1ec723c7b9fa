"""Extreme multi-label classification with local label embeddings."""

from ._core import (
    Dataset,
    DimensionError,
    HyperParams,
    Model,
    ModelFormatError,
    ParseError,
    approximation_error,
    grid_search,
    label_frequencies,
    load_model,
    model_from_bytes,
    parse_dataset,
    read_dataset,
    svp_complete_dense,
    train,
)

__all__ = [
    "Dataset",
    "DimensionError",
    "HyperParams",
    "Model",
    "ModelFormatError",
    "ParseError",
    "approximation_error",
    "grid_search",
    "label_frequencies",
    "load_model",
    "model_from_bytes",
    "parse_dataset",
    "read_dataset",
    "svp_complete_dense",
    "train",
]
