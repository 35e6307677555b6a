"""From-scratch gradient-boosted regression trees for binary classification.

Logistic loss, exact (sorted-feature) greedy split finding, leaf-wise tree
growth, row/feature subsampling, and early stopping on validation AUC.
Leaf values are damped Newton steps -G/(H + lambda); prediction applies
sigmoid(base_score + learning_rate * sum of leaf values).

A small full-batch logistic-regression trainer is included as the linear
comparator.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError, ValidationError
from .metrics import roc_auc
from .validation import check_binary_labels, check_feature_matrix

MODEL_FORMAT_VERSION = 1
_NO_SPLIT_GAIN = -np.inf


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyperparameters; defaults follow the reference backend setup."""

    learning_rate: float = 0.02
    num_iterations: int = 10000
    early_stopping_rounds: int = 1000
    row_subsample: float = 0.68
    feature_subsample: float = 0.28
    subsample_freq: int = 1
    num_leaves: int = 31
    min_leaf_samples: int = 20
    lambda_l2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValidationError("learning_rate must be in (0, 1]")
        if not (0.0 < self.row_subsample <= 1.0 and 0.0 < self.feature_subsample <= 1.0):
            raise ValidationError("subsample fractions must be in (0, 1]")
        if self.num_leaves < 2:
            raise ValidationError("num_leaves must be >= 2")
        if self.num_iterations < 1 or self.early_stopping_rounds < 1:
            raise ValidationError("iteration counts must be positive")
        if self.subsample_freq < 1:
            raise ValidationError("subsample_freq must be >= 1")


# Desk-scale override used by tests and the synthetic end-to-end runs.
DESK_CONFIG = TrainConfig(num_iterations=500, early_stopping_rounds=50)


@dataclass
class Tree:
    """Flat node arrays; feature == -1 marks a leaf. Split rule: x < threshold
    goes left."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.feature) - 1

    def make_split(self, node: int, feature: int, threshold: float, left: int, right: int):
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node] = left
        self.right[node] = right
        self.value[node] = 0.0

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f == -1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        stack = [(0, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if self.feature[node] == -1:
                out[idx] = self.value[node]
                continue
            goes_left = X[idx, self.feature[node]] < self.threshold[node]
            stack.append((self.left[node], idx[goes_left]))
            stack.append((self.right[node], idx[~goes_left]))
        return out


@dataclass
class BoostedModel:
    trees: list
    base_score: float
    learning_rate: float
    best_iteration: int
    # per-iteration diagnostics captured during training (not persisted)
    train_loss_history: list = field(default_factory=list)
    valid_auc_history: list = field(default_factory=list)

    def decision_scores(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        X = check_feature_matrix(X)
        if n_trees is None:
            n_trees = self.best_iteration
        scores = np.full(len(X), self.base_score)
        for tree in self.trees[:n_trees]:
            scores += self.learning_rate * tree.predict(X)
        return scores


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _log_loss(y: np.ndarray, scores: np.ndarray) -> float:
    p = _sigmoid(scores)
    eps = 1e-15
    p = np.clip(p, eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def _best_split(X, g, h, rows, feat_cols, min_leaf, lam):
    """Exact greedy search over the candidate features of one leaf.

    Returns (gain, feature, threshold) with gain = -inf when no valid
    split exists. Candidate thresholds are midpoints between distinct
    adjacent sorted values; both children must keep min_leaf rows.
    """
    n = len(rows)
    if n < 2 * min_leaf:
        return _NO_SPLIT_GAIN, -1, 0.0
    Xs = X[np.ix_(rows, feat_cols)]
    gs = g[rows]
    hs = h[rows]
    order = np.argsort(Xs, axis=0, kind="stable")
    Xo = np.take_along_axis(Xs, order, axis=0)
    Go = np.cumsum(gs[order], axis=0)
    Ho = np.cumsum(hs[order], axis=0)
    G, H = Go[-1], Ho[-1]

    Gl, Hl = Go[:-1], Ho[:-1]
    Gr, Hr = G - Gl, H - Hl
    parent = G**2 / (H + lam)
    gains = 0.5 * (Gl**2 / (Hl + lam) + Gr**2 / (Hr + lam) - parent)

    counts = np.arange(1, n)[:, None]
    valid = (counts >= min_leaf) & (n - counts >= min_leaf) & (Xo[1:] > Xo[:-1])
    gains = np.where(valid, gains, _NO_SPLIT_GAIN)

    # feature-major flatten so ties resolve to the lower feature index,
    # then to the lower threshold
    flat = np.argmax(gains.T)
    col, pos = divmod(flat, n - 1)
    gain = gains[pos, col]
    if not np.isfinite(gain) or gain <= 1e-12:
        return _NO_SPLIT_GAIN, -1, 0.0
    threshold = 0.5 * (Xo[pos, col] + Xo[pos + 1, col])
    return float(gain), int(feat_cols[col]), float(threshold)


def _leaf_value(g, h, rows, lam) -> float:
    return float(-g[rows].sum() / (h[rows].sum() + lam))


def _build_tree(X, g, h, rows, feat_cols, config: TrainConfig) -> Tree:
    """Leaf-wise growth: repeatedly split the frontier leaf with max gain."""
    tree = Tree()
    lam = config.lambda_l2
    root = tree.add_leaf(_leaf_value(g, h, rows, lam))
    frontier = {root: (rows, *_best_split(X, g, h, rows, feat_cols, config.min_leaf_samples, lam))}

    while tree.n_leaves < config.num_leaves:
        best_node, best_gain = -1, _NO_SPLIT_GAIN
        for node in sorted(frontier):
            gain = frontier[node][1]
            if gain > best_gain:
                best_node, best_gain = node, gain
        if best_node < 0 or best_gain == _NO_SPLIT_GAIN:
            break
        node_rows, _, feature, threshold = frontier.pop(best_node)
        goes_left = X[node_rows, feature] < threshold
        left_rows = node_rows[goes_left]
        right_rows = node_rows[~goes_left]
        left = tree.add_leaf(_leaf_value(g, h, left_rows, lam))
        right = tree.add_leaf(_leaf_value(g, h, right_rows, lam))
        tree.make_split(best_node, feature, threshold, left, right)
        frontier[left] = (
            left_rows,
            *_best_split(X, g, h, left_rows, feat_cols, config.min_leaf_samples, lam),
        )
        frontier[right] = (
            right_rows,
            *_best_split(X, g, h, right_rows, feat_cols, config.min_leaf_samples, lam),
        )
    return tree


def train(X_train, y_train, X_valid, y_valid, config: TrainConfig = TrainConfig()) -> BoostedModel:
    """Boost with logistic loss and stop on stalled validation AUC.

    best_iteration is the tree count of the best validation AUC seen;
    prediction uses trees[:best_iteration].
    """
    X_train = check_feature_matrix(X_train, "X_train")
    y_train = check_binary_labels(y_train, n_rows=len(X_train))
    X_valid = check_feature_matrix(X_valid, "X_valid")
    y_valid = check_binary_labels(
        y_valid, n_rows=len(X_valid), require_both_classes=False
    )
    if X_valid.shape[1] != X_train.shape[1]:
        raise ValidationError("train/valid feature dims differ")

    n, dim = X_train.shape
    prior = y_train.mean()
    base_score = float(np.log(prior / (1.0 - prior)))
    rng = np.random.default_rng(config.seed)

    model = BoostedModel(
        trees=[], base_score=base_score, learning_rate=config.learning_rate,
        best_iteration=0,
    )
    F_train = np.full(n, base_score)
    F_valid = np.full(len(X_valid), base_score)
    y_f = y_train.astype(np.float64)
    can_score_valid = len(np.unique(y_valid)) == 2

    best_auc = -np.inf
    rows = np.arange(n)
    n_rows_take = max(1, int(round(config.row_subsample * n)))
    n_feats_take = max(1, int(round(config.feature_subsample * dim)))

    for iteration in range(1, config.num_iterations + 1):
        if config.row_subsample < 1.0 and (iteration - 1) % config.subsample_freq == 0:
            rows = np.sort(rng.choice(n, size=n_rows_take, replace=False))
        if config.feature_subsample < 1.0:
            feat_cols = np.sort(rng.choice(dim, size=n_feats_take, replace=False))
        else:
            feat_cols = np.arange(dim)

        p = _sigmoid(F_train)
        g = p - y_f
        h = p * (1.0 - p)
        tree = _build_tree(X_train, g, h, rows, feat_cols, config)
        model.trees.append(tree)
        F_train += config.learning_rate * tree.predict(X_train)
        F_valid += config.learning_rate * tree.predict(X_valid)
        model.train_loss_history.append(_log_loss(y_f, F_train))

        if can_score_valid:
            auc = roc_auc(F_valid, y_valid)
        else:
            auc = -_log_loss(y_valid.astype(np.float64), F_valid)
        model.valid_auc_history.append(float(auc))
        if auc > best_auc:
            best_auc = auc
            model.best_iteration = iteration
        elif iteration - model.best_iteration >= config.early_stopping_rounds:
            break

    return model


def predict_proba(model: BoostedModel, X) -> np.ndarray:
    """Probability of the positive class; strictly inside (0, 1)."""
    return _sigmoid(model.decision_scores(X))


class GradientBoostedClassifier:
    """Estimator wrapper over train/predict_proba with get_params support."""

    def __init__(self, config: TrainConfig = TrainConfig()):
        self.config = config

    def get_params(self, deep: bool = True) -> dict:
        return {"config": self.config}

    def set_params(self, **params) -> "GradientBoostedClassifier":
        for key, value in params.items():
            if key != "config":
                raise ValueError(f"unknown parameter {key!r}")
            self.config = value
        return self

    def fit(self, X, y, eval_set=None) -> "GradientBoostedClassifier":
        if eval_set is None:
            raise ValidationError("early stopping requires eval_set=(X_valid, y_valid)")
        self.model_ = train(X, y, eval_set[0], eval_set[1], self.config)
        return self

    def predict_proba(self, X) -> np.ndarray:
        probs = predict_proba(self.model_, X)
        return np.column_stack([1.0 - probs, probs])

    def predict(self, X) -> np.ndarray:
        return (predict_proba(self.model_, X) >= 0.5).astype(int)


# ---------------------------------------------------------------------------
# persistence


def save_model(model: BoostedModel, path) -> None:
    """Versioned text format: header lines, then one CSV line per node."""
    lines = [
        f"respscreen-gbdt v{MODEL_FORMAT_VERSION}",
        f"base_score={model.base_score!r}",
        f"learning_rate={model.learning_rate!r}",
        f"best_iteration={model.best_iteration}",
        f"num_trees={len(model.trees)}",
        "tree_id,node_id,feature,threshold,left,right,leaf_value",
    ]
    for tree_id, tree in enumerate(model.trees):
        for node in range(len(tree.feature)):
            lines.append(
                f"{tree_id},{node},{tree.feature[node]},{tree.threshold[node]!r},"
                f"{tree.left[node]},{tree.right[node]},{tree.value[node]!r}"
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> BoostedModel:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or not lines[0].startswith("respscreen-gbdt v"):
        raise ModelFormatError(f"{path}: missing format signature")
    if lines[0] != f"respscreen-gbdt v{MODEL_FORMAT_VERSION}":
        raise ModelFormatError(f"{path}: unsupported version {lines[0]!r}")
    try:
        header = dict(line.split("=", 1) for line in lines[1:5])
        base_score = float(header["base_score"])
        learning_rate = float(header["learning_rate"])
        best_iteration = int(header["best_iteration"])
        num_trees = int(header["num_trees"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: bad header ({exc})") from None
    if lines[5] != "tree_id,node_id,feature,threshold,left,right,leaf_value":
        raise ModelFormatError(f"{path}: missing node-table header")

    trees = [Tree() for _ in range(num_trees)]
    for line in lines[6:]:
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ModelFormatError(f"{path}: bad node line {line!r}")
        tree_id, node_id = int(parts[0]), int(parts[1])
        tree = trees[tree_id]
        if node_id != len(tree.feature):
            raise ModelFormatError(f"{path}: node ids must be dense and ordered")
        tree.feature.append(int(parts[2]))
        tree.threshold.append(float(parts[3]))
        tree.left.append(int(parts[4]))
        tree.right.append(int(parts[5]))
        tree.value.append(float(parts[6]))
    return BoostedModel(
        trees=trees,
        base_score=base_score,
        learning_rate=learning_rate,
        best_iteration=best_iteration,
    )


# ---------------------------------------------------------------------------
# linear comparator


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float

    def predict_proba(self, X) -> np.ndarray:
        X = check_feature_matrix(X)
        return _sigmoid(X @ self.weights + self.bias)


def logistic_loss_grad(weights, bias, X, y, l2):
    """Mean log-loss with L2 penalty on weights; returns (loss, grad_w, grad_b)."""
    n = len(y)
    z = X @ weights + bias
    p = _sigmoid(z)
    eps = 1e-15
    loss = float(
        -np.mean(y * np.log(np.clip(p, eps, 1)) + (1 - y) * np.log(np.clip(1 - p, eps, 1)))
        + 0.5 * l2 * np.dot(weights, weights) / n
    )
    grad_w = X.T @ (p - y) / n + l2 * weights / n
    grad_b = float(np.mean(p - y))
    return loss, grad_w, grad_b


def train_linear_baseline(X, y, l2: float = 1.0, epochs: int = 500, lr: float = 0.1) -> LinearModel:
    """Full-batch gradient-descent logistic regression (penalty = 1/C)."""
    X = check_feature_matrix(X)
    y = check_binary_labels(y, n_rows=len(X)).astype(np.float64)
    weights = np.zeros(X.shape[1])
    bias = 0.0
    for _ in range(epochs):
        _, grad_w, grad_b = logistic_loss_grad(weights, bias, X, y, l2)
        weights -= lr * grad_w
        bias -= lr * grad_b
    return LinearModel(weights=weights, bias=bias)
