"""Fixed-length embedding vectors: pooling, fusion, and file exchange.

The embedding CSV is the boundary between this package and external
extractors; floats are serialized with ``repr`` so files round-trip
bit-exactly.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import EmbeddingFormatError, ValidationError
from .spectrograms import Spectrogram
from .validation import check_modality

# Canonical concatenation order for multi-modality fusion (alphabetical).
FUSION_ORDER = ("breathing", "cough", "speech")

EMBEDDING_HEADER_PREFIX = ["subject_id", "modality", "source", "dim"]


@dataclass(frozen=True)
class EmbeddingVector:
    """One recording's embedding with its provenance."""

    subject_id: str
    modality: str
    source: str
    values: np.ndarray

    def __post_init__(self):
        check_modality(self.modality)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError("embedding values must be a nonempty vector")
        if not np.all(np.isfinite(values)):
            raise ValidationError(
                f"embedding for {self.subject_id}/{self.modality} has non-finite values"
            )
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def key(self) -> tuple:
        return (self.subject_id, self.modality, self.source)


@dataclass
class EmbeddingSet:
    """Homogeneous collection: every member shares dim and source."""

    vectors: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for vec in self.vectors:
            if vec.key in seen:
                raise ValidationError(f"duplicate embedding key {vec.key}")
            seen.add(vec.key)
        dims = {vec.dim for vec in self.vectors}
        sources = {vec.source for vec in self.vectors}
        if len(dims) > 1:
            raise ValidationError(f"mixed embedding dims in one set: {sorted(dims)}")
        if len(sources) > 1:
            raise ValidationError(f"mixed sources in one set: {sorted(sources)}")

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self):
        return iter(self.vectors)

    @property
    def dim(self) -> int:
        if not self.vectors:
            raise ValidationError("empty embedding set has no dim")
        return self.vectors[0].dim

    @property
    def source(self) -> str:
        if not self.vectors:
            raise ValidationError("empty embedding set has no source")
        return self.vectors[0].source


class BaselineEmbedder:
    """Dependency-free stand-in embedder: per-band temporal mean + std.

    transform() maps one 128x154 spectrogram to a 256-dim vector (means of
    the 128 bands followed by their population standard deviations).
    """

    def fit(self, X=None, y=None) -> "BaselineEmbedder":
        return self

    def get_params(self, deep: bool = True) -> dict:
        return {}

    def transform(self, spec: Spectrogram) -> np.ndarray:
        matrix = spec.matrix
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("spectrogram has non-finite entries")
        return np.concatenate([matrix.mean(axis=1), matrix.std(axis=1)])


def baseline_embed(spec: Spectrogram, subject_id: str, modality: str) -> EmbeddingVector:
    """Pool a spectrogram into the 2*bands baseline embedding."""
    values = BaselineEmbedder().transform(spec)
    return EmbeddingVector(
        subject_id=subject_id,
        modality=modality,
        source=f"baseline-{spec.kind}",
        values=values,
    )


def average_time_embeddings(segments) -> np.ndarray:
    """Element-wise mean of per-segment embedding vectors."""
    segments = [np.asarray(seg, dtype=np.float64) for seg in segments]
    if not segments:
        raise ValidationError("no segment embeddings to average")
    dims = {seg.shape for seg in segments}
    if len(dims) > 1 or segments[0].ndim != 1:
        raise ValidationError(f"segment embeddings have ragged shapes: {sorted(dims)}")
    return np.mean(np.stack(segments), axis=0)


def concat_fusion(per_modality: dict, order=FUSION_ORDER) -> EmbeddingVector:
    """Concatenate one vector per modality in canonical order.

    All inputs must belong to the same subject; the fused source is the
    '+'-joined source list in concatenation order.
    """
    missing = [m for m in order if m not in per_modality]
    if missing:
        raise ValidationError(f"missing modalities for fusion: {missing}")
    vectors = [per_modality[m] for m in order]
    subjects = {vec.subject_id for vec in vectors}
    if len(subjects) != 1:
        raise ValidationError(f"fusion across different subjects: {sorted(subjects)}")
    values = np.concatenate([vec.values for vec in vectors])
    source = "+".join(vec.source for vec in vectors)
    # Fused vectors span modalities; keep the first modality tag for
    # bookkeeping (the set key stays unique per subject/source).
    return EmbeddingVector(
        subject_id=vectors[0].subject_id,
        modality=vectors[0].modality,
        source=source,
        values=values,
    )


def write_embeddings(embedding_set: EmbeddingSet, path) -> None:
    """Write the documented CSV: subject_id,modality,source,dim,v0..v{dim-1}."""
    if len(embedding_set) == 0:
        raise ValidationError("refusing to write an empty embedding set")
    dim = embedding_set.dim
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EMBEDDING_HEADER_PREFIX + [f"v{i}" for i in range(dim)])
        for vec in embedding_set:
            writer.writerow(
                [vec.subject_id, vec.modality, vec.source, vec.dim]
                + [repr(float(v)) for v in vec.values]
            )


def read_embeddings(path) -> EmbeddingSet:
    """Read and validate an embedding CSV produced by any extractor."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmbeddingFormatError(f"{path}: empty file") from None
        if header[:4] != EMBEDDING_HEADER_PREFIX:
            raise EmbeddingFormatError(
                f"{path}: header must start with {','.join(EMBEDDING_HEADER_PREFIX)}"
            )
        dim = len(header) - 4
        expected_cols = [f"v{i}" for i in range(dim)]
        if header[4:] != expected_cols:
            raise EmbeddingFormatError(f"{path}: value columns must be v0..v{dim - 1}")

        vectors = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4 + dim:
                raise EmbeddingFormatError(
                    f"{path}: row {row_no} has {len(row) - 4} values, expected {dim}"
                )
            subject_id, modality, source, dim_field = row[:4]
            try:
                row_dim = int(dim_field)
            except ValueError:
                raise EmbeddingFormatError(
                    f"{path}: row {row_no} has non-integer dim {dim_field!r}"
                ) from None
            if row_dim != dim:
                raise EmbeddingFormatError(
                    f"{path}: row {row_no} ({subject_id}/{modality}) declares dim "
                    f"{row_dim}, file header has {dim}"
                )
            try:
                values = np.array([float(v) for v in row[4:]], dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError(
                    f"{path}: row {row_no} has a non-numeric value"
                ) from None
            try:
                vectors.append(
                    EmbeddingVector(
                        subject_id=subject_id,
                        modality=modality,
                        source=source,
                        values=values,
                    )
                )
            except ValidationError as exc:
                raise EmbeddingFormatError(f"{path}: row {row_no}: {exc}") from None
    try:
        return EmbeddingSet(vectors=vectors)
    except ValidationError as exc:
        raise EmbeddingFormatError(f"{path}: {exc}") from None
