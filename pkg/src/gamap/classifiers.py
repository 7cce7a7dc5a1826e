"""Classifier suite used by the experiment protocols.

Every classifier is deterministic given (data, params, seed) and every
argmax tie breaks toward the lower class index. Inputs follow the
dataset convention: feature matrices are (dims, samples).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .errors import DataError


def _check_columns(X: np.ndarray, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != dim:
        raise DataError(f"test data has {X.shape[0] if X.ndim == 2 else '?'} rows, expected {dim}")
    return X


def _tikhonov(cov: np.ndarray) -> np.ndarray:
    """Ridge term 1e-6 * trace/n, with a tiny absolute floor for zero matrices."""
    n = cov.shape[0]
    eps = 1e-6 * float(np.trace(cov)) / n
    if eps <= 0.0:
        eps = 1e-12
    return cov + eps * np.eye(n)


@dataclass(frozen=True)
class KnnClassifier:
    train_X: np.ndarray
    train_y: np.ndarray
    class_count: int
    k: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _check_columns(X, self.train_X.shape[0])
        p = self.train_X.shape[1]
        order_keys = np.arange(p)
        out = np.empty(X.shape[1], dtype=np.int64)
        for j in range(X.shape[1]):
            d2 = ((self.train_X - X[:, j : j + 1]) ** 2).sum(axis=0)
            order = np.lexsort((order_keys, d2))[: self.k]
            votes = np.bincount(self.train_y[order], minlength=self.class_count + 1)
            best = votes.max()
            tied = np.flatnonzero(votes == best)
            if tied.size == 1:
                out[j] = tied[0]
            else:
                # nearest neighbor whose class is among the tied ones
                for idx in order:
                    if votes[self.train_y[idx]] == best:
                        out[j] = self.train_y[idx]
                        break
        return out


def fit_knn(train: LabeledDataset, k: int) -> KnnClassifier:
    """Majority vote over the k Euclidean nearest neighbors.

    Distance ties go to the lower train index; vote ties go to the class
    of the nearest member among the tied classes.
    """
    if not 1 <= k <= train.sample_count:
        raise DataError(f"k must lie in 1..{train.sample_count}")
    return KnnClassifier(train.features, train.labels, train.class_count, k)


@dataclass(frozen=True)
class LinearSvmClassifier:
    weights: np.ndarray  # (c, n)
    biases: np.ndarray  # (c,)
    class_count: int
    alphas: np.ndarray = field(repr=False, default=None)  # (c, p) dual variables, kept for audits

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = _check_columns(X, self.weights.shape[1])
        return self.weights @ X + self.biases[:, None]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_values(X), axis=0).astype(np.int64) + 1


def svm_dual_objective(X_aug: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """0.5 ||sum_i alpha_i y_i x_i||^2 - sum_i alpha_i for one binary problem."""
    w = (alpha * y) @ X_aug.T
    return 0.5 * float(w @ w) - float(alpha.sum())


def fit_linear_svm(
    train: LabeledDataset,
    c_reg: float = 1.0,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    seed: int = 0,
) -> LinearSvmClassifier:
    """One-vs-rest linear SVM trained by dual coordinate descent.

    Solves the L2-regularized hinge-loss dual (box constraint 0 <= a <= C)
    per class, sweeping coordinates in a seeded random order each epoch
    until the largest projected gradient falls below ``tol``. The bias is
    absorbed as a constant augmented feature.
    """
    if train.class_count < 2:
        raise DataError("need at least 2 classes")
    if not np.all(np.isfinite(train.features)):
        raise DataError("non-finite features")
    n, p = train.dim, train.sample_count
    X_aug = np.vstack([train.features, np.ones((1, p))])
    qdiag = (X_aug**2).sum(axis=0)
    rng = np.random.default_rng(seed)
    weights = np.zeros((train.class_count, n))
    biases = np.zeros(train.class_count)
    alphas = np.zeros((train.class_count, p))
    for cls in range(1, train.class_count + 1):
        y = np.where(train.labels == cls, 1.0, -1.0)
        alpha = np.zeros(p)
        w = np.zeros(n + 1)
        for _ in range(max_epochs):
            worst = 0.0
            for i in rng.permutation(p):
                margin_grad = y[i] * float(w @ X_aug[:, i]) - 1.0
                if alpha[i] <= 0.0:
                    pg = min(margin_grad, 0.0)
                elif alpha[i] >= c_reg:
                    pg = max(margin_grad, 0.0)
                else:
                    pg = margin_grad
                worst = max(worst, abs(pg))
                if abs(pg) > 1e-12:
                    new = min(max(alpha[i] - margin_grad / qdiag[i], 0.0), c_reg)
                    if new != alpha[i]:
                        w += (new - alpha[i]) * y[i] * X_aug[:, i]
                        alpha[i] = new
            if worst < tol:
                break
        weights[cls - 1] = w[:n]
        biases[cls - 1] = w[n]
        alphas[cls - 1] = alpha
    return LinearSvmClassifier(weights, biases, train.class_count, alphas)


@dataclass(frozen=True)
class GaussianClassifier:
    """Equal-prior Gaussian discriminant; shared covariance makes it linear."""

    means: np.ndarray  # (c, n)
    inverses: np.ndarray  # (c, n, n) precision matrices
    log_dets: np.ndarray  # (c,)
    class_count: int
    quadratic: bool
    pooled_fallback: tuple[int, ...] = ()

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = _check_columns(X, self.means.shape[1])
        out = np.empty((self.class_count, X.shape[1]))
        for cls in range(self.class_count):
            diff = X - self.means[cls][:, None]
            quad = np.sum(diff * (self.inverses[cls] @ diff), axis=0)
            out[cls] = -0.5 * (quad + self.log_dets[cls])
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(X), axis=0).astype(np.int64) + 1


def _class_stats(train: LabeledDataset):
    means, scatters, counts = [], [], []
    for cls in range(1, train.class_count + 1):
        block = train.features[:, train.class_indices(cls)]
        mu = block.mean(axis=1)
        centered = block - mu[:, None]
        means.append(mu)
        scatters.append(centered @ centered.T)
        counts.append(block.shape[1])
    return np.asarray(means), scatters, np.asarray(counts)


def _pooled_covariance(scatters, counts, c):
    dof = int(sum(counts)) - c
    total = sum(scatters)
    return total / dof if dof > 0 else np.zeros_like(total)


def fit_ldc(train: LabeledDataset) -> GaussianClassifier:
    """Linear discriminant: class means with one pooled, ridged covariance."""
    if train.class_count < 2:
        raise DataError("need at least 2 classes")
    means, scatters, counts = _class_stats(train)
    cov = _tikhonov(_pooled_covariance(scatters, counts, train.class_count))
    inv = np.linalg.inv(cov)
    _, log_det = np.linalg.slogdet(cov)
    c = train.class_count
    return GaussianClassifier(
        means, np.repeat(inv[None], c, axis=0), np.full(c, log_det), c, quadratic=False
    )


def fit_qdc(train: LabeledDataset) -> GaussianClassifier:
    """Quadratic discriminant: per-class ridged covariances.

    Classes with a single sample fall back to the pooled covariance and
    are recorded on the model.
    """
    if train.class_count < 2:
        raise DataError("need at least 2 classes")
    means, scatters, counts = _class_stats(train)
    pooled = _pooled_covariance(scatters, counts, train.class_count)
    inverses, log_dets, fallback = [], [], []
    for cls in range(train.class_count):
        if counts[cls] >= 2:
            cov = scatters[cls] / (counts[cls] - 1)
        else:
            cov = pooled
            fallback.append(cls + 1)
        cov = _tikhonov(cov)
        inverses.append(np.linalg.inv(cov))
        log_dets.append(np.linalg.slogdet(cov)[1])
    return GaussianClassifier(
        means, np.asarray(inverses), np.asarray(log_dets), train.class_count,
        quadratic=True, pooled_fallback=tuple(fallback),
    )


@dataclass(frozen=True)
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    label: int = 0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None


@dataclass(frozen=True)
class TreeOptions:
    max_depth: int = 20
    min_samples_split: int = 2


@dataclass(frozen=True)
class TreeClassifier:
    root: TreeNode
    dim: int
    class_count: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _check_columns(X, self.dim)
        out = np.empty(X.shape[1], dtype=np.int64)
        for j in range(X.shape[1]):
            node = self.root
            while node.feature >= 0:
                node = node.left if X[node.feature, j] <= node.threshold else node.right
            out[j] = node.label
        return out


def _gini_split_cost(col: np.ndarray, y: np.ndarray, c: int):
    """Best midpoint threshold for one feature by sorted sweep.

    Returns (weighted child impurity * total count, threshold); ties on
    the cost keep the smaller threshold. None when the column is constant.
    """
    order = np.argsort(col, kind="stable")
    vals = col[order]
    change = np.flatnonzero(vals[:-1] != vals[1:])
    if change.size == 0:
        return None
    onehot = np.zeros((y.size, c))
    onehot[np.arange(y.size), y[order] - 1] = 1.0
    cum = np.cumsum(onehot, axis=0)
    left = cum[change]
    total = cum[-1]
    right = total - left
    n_left = (change + 1).astype(np.float64)
    n_right = y.size - n_left
    # n * gini(node) = n - sum_k counts_k^2 / n
    cost_left = n_left - (left**2).sum(axis=1) / n_left
    cost_right = n_right - (right**2).sum(axis=1) / n_right
    costs = cost_left + cost_right
    best = int(np.argmin(costs))  # first minimum = smallest threshold
    threshold = 0.5 * (vals[change[best]] + vals[change[best] + 1])
    return float(costs[best]), float(threshold)


def _grow_tree(X: np.ndarray, y: np.ndarray, c: int, depth: int, opts: TreeOptions) -> TreeNode:
    counts = np.bincount(y, minlength=c + 1)[1:]
    majority = int(np.argmax(counts)) + 1
    if (
        counts.max() == y.size  # pure
        or depth >= opts.max_depth
        or y.size < opts.min_samples_split
    ):
        return TreeNode(label=majority)
    best = None
    for f in range(X.shape[0]):
        found = _gini_split_cost(X[f], y, c)
        if found is None:
            continue
        cost, threshold = found
        if best is None or cost < best[0]:  # strict: ties keep lower feature
            best = (cost, f, threshold)
    if best is None:
        return TreeNode(label=majority)
    _, f, threshold = best
    mask = X[f] <= threshold
    left = _grow_tree(X[:, mask], y[mask], c, depth + 1, opts)
    right = _grow_tree(X[:, ~mask], y[~mask], c, depth + 1, opts)
    return TreeNode(feature=f, threshold=threshold, label=majority, left=left, right=right)


def fit_tree(train: LabeledDataset, opts: TreeOptions = TreeOptions()) -> TreeClassifier:
    """CART with Gini impurity and axis-aligned midpoint splits.

    No pruning; recursion stops at pure nodes, depth ``max_depth``, or
    nodes below ``min_samples_split``. Ties prefer the lower feature
    index, then the smaller threshold.
    """
    root = _grow_tree(train.features, train.labels, train.class_count, 0, opts)
    return TreeClassifier(root, train.dim, train.class_count)


def predict(clf, X: np.ndarray) -> np.ndarray:
    """Labels in 1..c for each column of X (empty input gives empty output)."""
    return clf.predict(X)
