"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from gamap.dataset import LabeledDataset


def make_ds(features, labels, class_count=None) -> LabeledDataset:
    """Dataset from an (n, p) array-like and a label list."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if class_count is None:
        class_count = int(labels.max())
    return LabeledDataset(features, labels, class_count)


def gaussian_benchmark(
    seed: int = 7,
    n: int = 10,
    per_class: int = 60,
    n_classes: int = 3,
    separation: float = 0.075,
    signal_std: float = 0.05,
    noise_std: float = 0.8,
) -> LabeledDataset:
    """Overlapping Gaussian classes with one dominant nuisance direction.

    Class means differ in the first couple of coordinates; the last
    coordinate carries class-independent high-variance noise, which is
    exactly the geometry a learned orthonormal projection should drop.
    The small overall scale keeps the default-C linear SVM in its
    saturated regime, where that nuisance direction genuinely hurts it.
    """
    rng = np.random.default_rng(seed)
    std = np.full(n, signal_std)
    std[-1] = noise_std
    means = np.zeros((n_classes, n))
    for k in range(1, n_classes):
        means[k, (k - 1) % (n - 1)] = separation
    blocks, labels = [], []
    for k in range(n_classes):
        blocks.append(means[k][:, None] + std[:, None] * rng.standard_normal((n, per_class)))
        labels += [k + 1] * per_class
    return LabeledDataset(np.hstack(blocks), np.asarray(labels, dtype=np.int64), n_classes)


def random_labeled(rng, n, p, n_classes, integer_grid=False):
    """Random dataset; integer_grid=True gives exactly representable ties."""
    while True:
        if integer_grid:
            X = rng.integers(0, 6, size=(n, p)).astype(np.float64)
        else:
            X = rng.standard_normal((n, p))
        labels = rng.integers(1, n_classes + 1, size=p)
        if np.unique(labels).size == n_classes:
            return LabeledDataset(X, labels.astype(np.int64), n_classes)


def random_orthogonal(rng, m: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((m, m)))
    return Q * np.sign(np.diag(R))
