"""Embedding extractor companion package: trainable compact CNN and
surrogate-backed wrappers for large pretrained audio models."""

__version__ = "0.1.0"

from .lenet import Lenet, lenet_embeddings, train_lenet
from .pretrained import (
    EXTRACTOR_SPECS,
    ExtractorSpec,
    ModelUnavailableError,
    SurrogateEmbedder,
    embed_clip,
    load_embedder,
    segment_clip,
)
from .export import extract_to_csv, train_lenet_on_manifest, write_embedding_csv

__all__ = [
    "EXTRACTOR_SPECS",
    "ExtractorSpec",
    "Lenet",
    "ModelUnavailableError",
    "SurrogateEmbedder",
    "embed_clip",
    "extract_to_csv",
    "lenet_embeddings",
    "load_embedder",
    "segment_clip",
    "train_lenet",
    "train_lenet_on_manifest",
    "write_embedding_csv",
]
