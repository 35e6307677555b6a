"""Feature ablation levers: class-mean dimension reduction and SVM-SMOTE.

Reduction ranks dimensions by the absolute difference of per-class means
(lowest difference = least significant) and drops the requested fraction;
the mask fitted on dev features is reused verbatim on test. Oversampling
interpolates new positives between borderline positives (support vectors
of a linear max-margin separator) and their nearest positive neighbors.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .validation import check_binary_labels, check_feature_matrix, check_fraction

MAX_DROP_FRACTION = 0.9


@dataclass(frozen=True)
class DimensionRanking:
    """Per-dimension |mean_pos - mean_neg| plus the ascending-order permutation."""

    diffs: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        if sorted(self.order.tolist()) != list(range(len(self.diffs))):
            raise ValidationError("order is not a permutation of the dimensions")
        if np.any(self.diffs < 0):
            raise ValidationError("diffs must be nonnegative")


@dataclass(frozen=True)
class ReductionMask:
    """Sorted kept-dimension indices for a given drop fraction."""

    keep: np.ndarray
    total_dim: int
    drop_fraction: float

    def __post_init__(self):
        expected = self.total_dim - int(np.floor(self.drop_fraction * self.total_dim))
        if len(self.keep) != expected:
            raise ValidationError(
                f"mask keeps {len(self.keep)} dims, expected {expected}"
            )
        if len(self.keep) and (self.keep.min() < 0 or self.keep.max() >= self.total_dim):
            raise ValidationError("mask indices out of range")


@dataclass(frozen=True)
class OversampleConfig:
    multiplier: int = 2
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if not (2 <= self.multiplier <= 5):
            raise ValidationError(f"multiplier must be in [2, 5], got {self.multiplier}")
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be >= 1")


def rank_dimensions(X, y) -> DimensionRanking:
    """Rank dimensions ascending by |mean over positives - mean over negatives|.

    Ties break toward the lower dimension index, so the ranking is a
    deterministic function of the data.
    """
    X = check_feature_matrix(X)
    y = check_binary_labels(y, n_rows=X.shape[0])
    diffs = np.abs(X[y == 1].mean(axis=0) - X[y == 0].mean(axis=0))
    order = np.argsort(diffs, kind="stable")
    return DimensionRanking(diffs=diffs, order=order)


def apply_reduction(X, ranking: DimensionRanking, drop_fraction: float):
    """Drop the floor(rho * dim) least significant dimensions.

    Returns (reduced matrix, ReductionMask). rho = 0 is the identity.
    """
    X = np.asarray(X, dtype=np.float64)
    rho = check_fraction(drop_fraction, "drop_fraction", high=MAX_DROP_FRACTION)
    dim = len(ranking.diffs)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValidationError(
            f"matrix has {X.shape[-1] if X.ndim == 2 else '?'} dims; ranking has {dim}"
        )
    n_drop = int(np.floor(rho * dim))
    dropped = ranking.order[:n_drop]
    keep = np.setdiff1d(np.arange(dim), dropped)
    mask = ReductionMask(keep=keep, total_dim=dim, drop_fraction=rho)
    return X[:, keep], mask


def apply_mask(X, mask: ReductionMask) -> np.ndarray:
    """Apply a previously fitted mask (e.g. dev-fitted mask onto test rows)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != mask.total_dim:
        raise ValidationError(
            f"matrix has {X.shape[-1] if X.ndim == 2 else '?'} dims; "
            f"mask was fitted on {mask.total_dim}"
        )
    return X[:, mask.keep]


def write_mask(mask: ReductionMask, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "total_dim", "rho"])
        for idx in mask.keep:
            writer.writerow([int(idx), mask.total_dim, repr(float(mask.drop_fraction))])


def read_mask(path) -> ReductionMask:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["dim", "total_dim", "rho"]:
            raise ValidationError(f"{path}: bad mask header {header}")
        keep, totals, rhos = [], set(), set()
        for row in reader:
            if not row:
                continue
            keep.append(int(row[0]))
            totals.add(int(row[1]))
            rhos.add(float(row[2]))
        if len(totals) != 1 or len(rhos) != 1:
            raise ValidationError(f"{path}: inconsistent total_dim/rho columns")
    return ReductionMask(
        keep=np.array(sorted(keep)), total_dim=totals.pop(), drop_fraction=rhos.pop()
    )


class ClassMeanReducer:
    """Estimator wrapper: fit learns the ranking+mask, transform applies it."""

    def __init__(self, drop_fraction: float = 0.0):
        self.drop_fraction = drop_fraction

    def get_params(self, deep: bool = True) -> dict:
        return {"drop_fraction": self.drop_fraction}

    def set_params(self, **params) -> "ClassMeanReducer":
        for key, value in params.items():
            if key != "drop_fraction":
                raise ValueError(f"unknown parameter {key!r}")
            self.drop_fraction = value
        return self

    def fit(self, X, y) -> "ClassMeanReducer":
        self.ranking_ = rank_dimensions(X, y)
        _, self.mask_ = apply_reduction(X, self.ranking_, self.drop_fraction)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "mask_"):
            raise ValidationError("reducer is not fitted")
        return apply_mask(X, self.mask_)

    def fit_transform(self, X, y) -> np.ndarray:
        return self.fit(X, y).transform(X)


def _fit_linear_margin(X, y_signed, epochs=200, reg=0.01):
    """Subgradient descent on the primal hinge objective; returns (w, b).

    Features are standardized internally so the step size is scale-free;
    the returned weights act on the standardized space.
    """
    n = len(y_signed)
    w = np.zeros(X.shape[1])
    b = 0.0
    for t in range(1, epochs + 1):
        margins = y_signed * (X @ w + b)
        active = margins < 1.0
        grad_w = reg * w - (y_signed[active, None] * X[active]).sum(axis=0) / n
        grad_b = -y_signed[active].sum() / n
        step = 1.0 / (reg * t)
        w -= step * grad_w
        b -= step * grad_b
    return w, b


class SvmSmote:
    """Minority oversampling seeded from borderline positives.

    fit_resample multiplies the positive count exactly by ``multiplier``;
    synthetic rows are appended after the untouched originals. Provenance
    of each synthetic row is kept in ``provenance_`` as
    (seed_row, neighbor_row, lam) index triples into the input matrix.
    """

    def __init__(self, multiplier: int = 2, k_neighbors: int = 5, seed: int = 0):
        self.multiplier = multiplier
        self.k_neighbors = k_neighbors
        self.seed = seed

    def get_params(self, deep: bool = True) -> dict:
        return {
            "multiplier": self.multiplier,
            "k_neighbors": self.k_neighbors,
            "seed": self.seed,
        }

    def set_params(self, **params) -> "SvmSmote":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit_resample(self, X, y):
        config = OversampleConfig(
            multiplier=self.multiplier, k_neighbors=self.k_neighbors, seed=self.seed
        )
        X = check_feature_matrix(X)
        y = check_binary_labels(y, n_rows=X.shape[0])
        pos_idx = np.flatnonzero(y == 1)
        n_pos = len(pos_idx)
        if n_pos < config.k_neighbors + 1:
            raise ValidationError(
                f"need at least k_neighbors+1={config.k_neighbors + 1} positives, "
                f"got {n_pos}"
            )

        degenerate = bool(np.all(X[pos_idx] == X[pos_idx[0]]))
        if degenerate:
            warnings.warn(
                "all positive rows are identical; synthetic samples are copies",
                stacklevel=2,
            )

        # standardize for margin fitting and neighbor search only
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        Z = (X - mu) / sd
        y_signed = np.where(y == 1, 1.0, -1.0)
        w, b = _fit_linear_margin(Z, y_signed)
        margins = y_signed[pos_idx] * (Z[pos_idx] @ w + b)
        seeds = pos_idx[margins < 1.0]
        if len(seeds) == 0:
            seeds = pos_idx

        # k nearest positive neighbors of each seed (excluding itself)
        Zp = Z[pos_idx]
        neighbor_table = {}
        for seed_row in seeds:
            dists = np.linalg.norm(Zp - Z[seed_row], axis=1)
            order = np.argsort(dists, kind="stable")
            candidates = [pos_idx[j] for j in order if pos_idx[j] != seed_row]
            neighbor_table[seed_row] = candidates[: config.k_neighbors]

        rng = np.random.default_rng(config.seed)
        n_synthetic = (config.multiplier - 1) * n_pos
        synthetic = np.empty((n_synthetic, X.shape[1]))
        provenance = []
        for i in range(n_synthetic):
            seed_row = int(seeds[i % len(seeds)])
            neighbors = neighbor_table[seed_row]
            neighbor_row = int(neighbors[rng.integers(len(neighbors))])
            lam = float(rng.uniform())
            synthetic[i] = X[seed_row] + lam * (X[neighbor_row] - X[seed_row])
            provenance.append((seed_row, neighbor_row, lam))

        self.provenance_ = provenance
        X_out = np.vstack([X, synthetic])
        y_out = np.concatenate([y, np.ones(n_synthetic, dtype=y.dtype)])
        return X_out, y_out


def svm_smote(X, y, config: OversampleConfig):
    """Functional form of SvmSmote.fit_resample."""
    sampler = SvmSmote(
        multiplier=config.multiplier, k_neighbors=config.k_neighbors, seed=config.seed
    )
    return sampler.fit_resample(X, y)
