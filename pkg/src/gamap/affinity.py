"""Signed nearest-neighbor affinity graphs over labeled samples.

For every sample the within-class and between-class nearest neighbors
(Euclidean distance, ties broken toward the smaller sample index) are
collected; the affinity matrix scores symmetrized within-pairs +1 and
between-pairs -1. The signed Laplacian D - A turns the pairwise
projection cost into a trace form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse

from .dataset import LabeledDataset
from .errors import DataError


@dataclass(frozen=True)
class NeighborSets:
    """Per-sample within/between neighbor index lists (ascending, 0-based).

    Lists are truncated when a class is too small to supply the requested
    number of neighbors; ``truncated`` records that at least one was.
    """

    within: list[np.ndarray]
    between: list[np.ndarray]
    n_within: int
    n_between: int
    truncated: bool


@dataclass(frozen=True)
class AffinityGraph:
    """Sparse symmetric matrix with entries in {-1, 0, +1} plus its sources."""

    entries: scipy.sparse.csr_matrix  # (p, p) int8
    source: NeighborSets
    labels: np.ndarray  # (p,) int64

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def edge_count(self) -> int:
        return self.entries.nnz // 2


def squared_distances(X: np.ndarray) -> np.ndarray:
    """Exact pairwise squared Euclidean distances between columns of X.

    Computed per column from explicit differences (not the expanded
    Gram-matrix identity), so the result is exactly symmetric and safe to
    use for index-based tie-breaking.
    """
    p = X.shape[1]
    d2 = np.empty((p, p))
    for i in range(p):
        d2[i] = ((X - X[:, i : i + 1]) ** 2).sum(axis=0)
    return d2


def neighbor_sets(train: LabeledDataset, n_within: int, n_between: int) -> NeighborSets:
    """k-nearest-neighbor lists restricted to same-class / different-class pools.

    Distances are taken in the dataset's original feature space. Ties at
    equal distance go to the smaller sample index. Classes smaller than
    ``n_within + 1`` (or complement pools smaller than ``n_between``)
    truncate the corresponding list instead of erroring.
    """
    if n_within < 1 or n_between < 1:
        raise DataError("neighbor counts must be >= 1")
    if train.class_count < 2:
        raise DataError("need at least 2 classes to build between-class neighbors")
    X, labels = train.features, train.labels
    p = train.sample_count
    d2 = squared_distances(X)
    within: list[np.ndarray] = []
    between: list[np.ndarray] = []
    truncated = False
    idx = np.arange(p)
    for i in range(p):
        same = idx[(labels == labels[i]) & (idx != i)]
        diff = idx[labels != labels[i]]
        w = same[np.lexsort((same, d2[i, same]))][:n_within]
        b = diff[np.lexsort((diff, d2[i, diff]))][:n_between]
        if w.size < n_within or b.size < n_between:
            truncated = True
        within.append(np.sort(w))
        between.append(np.sort(b))
    return NeighborSets(within, between, n_within, n_between, truncated)


def build_affinity(sets: NeighborSets, labels: np.ndarray) -> AffinityGraph:
    """Signed affinity matrix from neighbor sets.

    A_ij = +1 when i and j are within-neighbors of each other in either
    direction, -1 when between-neighbors in either direction, else 0.
    The +1/-1 cases cannot collide because the neighbor pools are split
    by label.
    """
    labels = np.asarray(labels, dtype=np.int64)
    p = len(sets.within)
    if labels.shape[0] != p:
        raise DataError("labels length does not match neighbor sets")
    within_pairs: set[tuple[int, int]] = set()
    between_pairs: set[tuple[int, int]] = set()
    for i in range(p):
        for j in sets.within[i]:
            if labels[j] != labels[i]:
                raise DataError("within-neighbor with a different label")
            within_pairs.add((min(i, int(j)), max(i, int(j))))
        for j in sets.between[i]:
            if labels[j] == labels[i]:
                raise DataError("between-neighbor with the same label")
            between_pairs.add((min(i, int(j)), max(i, int(j))))
    rows, cols, vals = [], [], []
    for (i, j), v in [(pair, 1) for pair in sorted(within_pairs)] + [
        (pair, -1) for pair in sorted(between_pairs)
    ]:
        rows += [i, j]
        cols += [j, i]
        vals += [v, v]
    entries = scipy.sparse.csr_matrix(
        (np.asarray(vals, dtype=np.int8), (rows, cols)), shape=(p, p)
    )
    return AffinityGraph(entries, sets, labels)


def signed_laplacian(graph: AffinityGraph) -> np.ndarray:
    """Dense D - A with D the diagonal of row sums (indefinite in general)."""
    A = graph.entries.toarray().astype(np.float64)
    return np.diag(A.sum(axis=1)) - A


def save_matrix_market(graph: AffinityGraph, path) -> None:
    """Dump the affinity matrix as Matrix Market coordinate text (1-based)."""
    scipy.io.mmwrite(path, graph.entries.tocoo(), field="integer")
