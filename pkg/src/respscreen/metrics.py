"""Challenge evaluation protocol: AUC, sensitivity at a specificity floor,
and subsample confidence intervals.

The operating point is found by sweeping decision thresholds 0, 0.0001,
..., 1 with the positive-inclusive rule (predict positive iff score >= t):
among thresholds whose specificity clears the floor, the one with maximal
sensitivity wins, ties broken toward the lowest threshold.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .validation import check_binary_labels, check_scores

SPEC_FLOOR = 0.9513
THRESHOLD_STEP = 0.0001


@dataclass(frozen=True)
class ConfidenceInterval:
    low: float
    high: float
    point: float
    n_runs: int

    def __post_init__(self):
        if not (self.low <= self.point <= self.high):
            raise ValidationError("confidence interval must bracket its point")


@dataclass
class EvalReport:
    """Operating-point metrics plus optional CI and run metadata."""

    auc: float
    sensitivity: float
    specificity: float
    threshold: float
    precision: float
    f1: float
    n_pos: int
    n_neg: int
    feasible: bool = True
    ci: ConfidenceInterval | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        payload = {
            "auc": self.auc,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "threshold": self.threshold,
            "precision": self.precision,
            "f1": self.f1,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "feasible": self.feasible,
        }
        if self.ci is not None:
            payload["ci_low"] = self.ci.low
            payload["ci_high"] = self.ci.high
            payload["ci_runs"] = self.ci.n_runs
        if self.metadata:
            payload["metadata"] = dict(sorted(self.metadata.items()))
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        lines = []
        for key, value in sorted(self.to_dict().items()):
            if key == "metadata":
                for meta_key, meta_value in value.items():
                    lines.append(f"metadata.{meta_key}={meta_value}")
            else:
                lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their group average."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Rank-statistic AUC: P(random positive outranks random negative),
    ties counted half."""
    scores = check_scores(scores)
    labels = check_binary_labels(labels, n_rows=len(scores))
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    ranks = _average_ranks(scores)
    pos_rank_sum = ranks[labels == 1].sum()
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def threshold_grid(step: float = THRESHOLD_STEP) -> np.ndarray:
    n_steps = int(round(1.0 / step))
    return np.arange(n_steps + 1) / n_steps


def sen_at_spec(
    scores,
    labels,
    min_spec: float = SPEC_FLOOR,
    step: float = THRESHOLD_STEP,
    metadata: dict | None = None,
) -> EvalReport:
    """Best sensitivity over the threshold grid subject to the specificity floor.

    When no grid threshold satisfies the floor, the report falls back to
    the most specific operating point and clears the ``feasible`` flag.
    """
    scores = check_scores(scores, unit_interval=True)
    labels = check_binary_labels(labels, n_rows=len(scores))
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos

    grid = threshold_grid(step)
    pos_sorted = np.sort(scores[labels == 1])
    neg_sorted = np.sort(scores[labels == 0])
    # predicted positive iff score >= t
    tp = n_pos - np.searchsorted(pos_sorted, grid, side="left")
    fp = n_neg - np.searchsorted(neg_sorted, grid, side="left")
    sensitivity = tp / n_pos
    specificity = (n_neg - fp) / n_neg

    feasible_mask = specificity >= min_spec
    if np.any(feasible_mask):
        feasible = True
        candidates = np.flatnonzero(feasible_mask)
        best = candidates[np.argmax(sensitivity[candidates])]  # first max: lowest t
    else:
        feasible = False
        best_spec = specificity.max()
        candidates = np.flatnonzero(specificity == best_spec)
        best = candidates[np.argmax(sensitivity[candidates])]

    tp_best = int(tp[best])
    fp_best = int(fp[best])
    predicted_pos = tp_best + fp_best
    precision = tp_best / predicted_pos if predicted_pos else 0.0
    sen_best = float(sensitivity[best])
    f1 = (
        2.0 * precision * sen_best / (precision + sen_best)
        if (precision + sen_best) > 0
        else 0.0
    )
    return EvalReport(
        auc=roc_auc(scores, labels),
        sensitivity=sen_best,
        specificity=float(specificity[best]),
        threshold=float(grid[best]),
        precision=precision,
        f1=f1,
        n_pos=n_pos,
        n_neg=n_neg,
        feasible=feasible,
        metadata=metadata or {},
    )


def confidence_interval(
    metric_fn,
    scores,
    labels,
    n_runs: int = 10,
    seed: int = 0,
    subsample_fraction: float = 0.8,
    max_retries: int = 20,
) -> ConfidenceInterval:
    """Normal-approximation CI over stratified random subsamples.

    Each run draws ``subsample_fraction`` of every class without
    replacement; the interval is mean +/- 1.96 * sample std of the per-run
    metric values.
    """
    if n_runs < 2:
        raise ValidationError("need at least 2 runs for a confidence interval")
    scores = check_scores(scores)
    labels = check_binary_labels(labels, n_rows=len(scores))
    rng = np.random.default_rng(seed)
    pos_idx = np.flatnonzero(labels == 1)
    neg_idx = np.flatnonzero(labels == 0)
    n_pos_take = max(1, int(round(subsample_fraction * len(pos_idx))))
    n_neg_take = max(1, int(round(subsample_fraction * len(neg_idx))))

    values = []
    for _ in range(n_runs):
        for attempt in range(max_retries):
            take = np.concatenate(
                [
                    pos_idx[rng.permutation(len(pos_idx))[:n_pos_take]],
                    neg_idx[rng.permutation(len(neg_idx))[:n_neg_take]],
                ]
            )
            sub_labels = labels[take]
            if len(np.unique(sub_labels)) == 2:
                values.append(float(metric_fn(scores[take], sub_labels)))
                break
        else:
            raise ValidationError(
                "subsample kept collapsing to a single class; check the data"
            )
    values = np.array(values)
    point = float(values.mean())
    spread = 1.96 * float(values.std(ddof=1))
    return ConfidenceInterval(
        low=point - spread, high=point + spread, point=point, n_runs=n_runs
    )
