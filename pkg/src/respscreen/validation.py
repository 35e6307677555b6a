"""Input-validation helpers used by the estimators and metric functions."""

import numpy as np

from .errors import ValidationError

MODALITIES = ("breathing", "cough", "speech")
SPECTROGRAM_KINDS = ("logmel", "gammatone", "scalogram")


def check_feature_matrix(X, name="X") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {X.shape}")
    if X.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise ValidationError(f"{name} contains NaN or infinite values")
    return X


def check_binary_labels(y, n_rows=None, require_both_classes=True) -> np.ndarray:
    """Coerce labels to a 0/1 int array, optionally requiring both classes."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValidationError(f"labels must be 1-D, got shape {y.shape}")
    if not np.all(np.isin(y, (0, 1))):
        raise ValidationError("labels must contain only 0 and 1")
    y = y.astype(np.int64)
    if n_rows is not None and len(y) != n_rows:
        raise ValidationError(f"got {len(y)} labels for {n_rows} rows")
    if require_both_classes and len(np.unique(y)) < 2:
        raise ValidationError("labels contain a single class; need both")
    return y


def check_scores(scores, name="scores", unit_interval=False) -> np.ndarray:
    """Coerce to a finite 1-D float array; optionally enforce [0, 1] range."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValidationError(f"{name} contains NaN or infinite values")
    if unit_interval and (scores.min() < 0.0 or scores.max() > 1.0):
        raise ValidationError(f"{name} must lie in [0, 1]")
    return scores


def check_modality(modality: str) -> str:
    if modality not in MODALITIES:
        raise ValidationError(
            f"unknown modality {modality!r}; expected one of {MODALITIES}"
        )
    return modality


def check_fraction(value, name, low=0.0, high=1.0) -> float:
    value = float(value)
    if not (low <= value <= high):
        raise ValidationError(f"{name} must be in [{low}, {high}], got {value}")
    return value
