"""Baseline dimensionality reductions: PCA, LDA, RBF kernel PCA, MFA.

All fits are deterministic: eigenvector columns are sign-fixed so the
largest-magnitude entry is positive, and near-singular scatter matrices
get a trace-scaled ridge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .affinity import neighbor_sets, squared_distances
from .dataset import LabeledDataset
from .errors import DataError


def _sign_fix(B: np.ndarray) -> np.ndarray:
    out = B.copy()
    for j in range(out.shape[1]):
        lead = np.argmax(np.abs(out[:, j]))
        if out[lead, j] < 0:
            out[:, j] = -out[:, j]
    return out


def _tikhonov(mat: np.ndarray) -> np.ndarray:
    eps = 1e-6 * float(np.trace(mat)) / mat.shape[0]
    if eps <= 0.0:
        eps = 1e-12
    return mat + eps * np.eye(mat.shape[0])


@dataclass(frozen=True)
class DrModel:
    kind: str  # pca | lda | kpca | mfa
    out_dim: int
    basis: np.ndarray | None = None  # (n, d) for the linear methods
    center: np.ndarray | None = None  # (n,) PCA mean
    train_X: np.ndarray | None = None  # KPCA support samples
    gamma: float | None = None
    coeffs: np.ndarray | None = None  # (p, d) kernel coefficients, scaled 1/sqrt(eig)
    kernel_row_mean: np.ndarray | None = None  # (p,)
    kernel_mean: float | None = None
    train_scores: np.ndarray | None = None  # (d, p) KPCA scores of the training set
    degenerate: bool = False

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0] if self.basis is not None else self.train_X.shape[0]


def fit_pca(X: np.ndarray, d: int) -> DrModel:
    """Top-d principal directions of the sample covariance."""
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if not 1 <= d <= n:
        raise DataError(f"PCA dimension must lie in 1..{n}")
    mean = X.mean(axis=1)
    centered = X - mean[:, None]
    cov = centered @ centered.T / max(p - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    basis = _sign_fix(vecs[:, ::-1][:, :d])
    return DrModel("pca", d, basis=basis, center=mean)


def fit_lda(X: np.ndarray, labels: np.ndarray, d: int) -> DrModel:
    """Fisher directions: top generalized eigenvectors of (S_b, S_w + ridge)."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = X.shape[0]
    classes = np.unique(labels)
    c = classes.size
    if not 1 <= d <= c - 1:
        raise DataError(f"LDA dimension must lie in 1..{c - 1}")
    overall = X.mean(axis=1)
    s_w = np.zeros((n, n))
    s_b = np.zeros((n, n))
    for cls in classes:
        block = X[:, labels == cls]
        mu = block.mean(axis=1)
        centered = block - mu[:, None]
        s_w += centered @ centered.T
        gap = (mu - overall)[:, None]
        s_b += block.shape[1] * (gap @ gap.T)
    vals, vecs = scipy.linalg.eigh(s_b, _tikhonov(s_w))
    top = vecs[:, ::-1][:, :d]
    top = top / np.linalg.norm(top, axis=0)
    return DrModel("lda", d, basis=_sign_fix(top))


def fit_kpca(X: np.ndarray, d: int, gamma: float | None = None) -> DrModel:
    """RBF kernel PCA: eigendecomposition of the double-centered Gram matrix.

    Coefficients are scaled by 1/sqrt(eigenvalue); components whose
    eigenvalue collapses to numerical zero are zeroed out and flagged.
    """
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if not 1 <= d <= p:
        raise DataError(f"KPCA dimension must lie in 1..{p}")
    if gamma is None:
        gamma = 1.0 / n
    if gamma <= 0:
        raise DataError("gamma must be positive")
    K = np.exp(-gamma * squared_distances(X))
    row_mean = K.mean(axis=0)
    total = float(K.mean())
    Kc = K - row_mean[None, :] - row_mean[:, None] + total
    vals, vecs = np.linalg.eigh(Kc)
    vals, vecs = vals[::-1][:d], _sign_fix(vecs[:, ::-1][:, :d])
    floor = max(1e-12, p * np.finfo(float).eps * max(float(vals[0]), 0.0))
    usable = vals > floor
    coeffs = np.zeros((p, d))
    coeffs[:, usable] = vecs[:, usable] / np.sqrt(vals[usable])
    model = DrModel(
        "kpca", d, train_X=X, gamma=gamma, coeffs=coeffs,
        kernel_row_mean=row_mean, kernel_mean=total,
        train_scores=coeffs.T @ Kc, degenerate=bool(np.any(~usable)),
    )
    return model


def _adjacency(neighbor_lists, p: int) -> np.ndarray:
    W = np.zeros((p, p))
    for i, members in enumerate(neighbor_lists):
        for j in members:
            W[i, j] = W[j, i] = 1.0
    return W


def fit_mfa(X: np.ndarray, labels: np.ndarray, d: int, k1: int = 9, k2: int = 9) -> DrModel:
    """Marginal Fisher analysis via the within/between neighbor machinery.

    Two unsigned neighbor graphs (k1 within-class, k2 between-class)
    yield Laplacians L_w and L_b; directions are the top generalized
    eigenvectors of (X L_b X^T, X L_w X^T + ridge).
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, p = X.shape
    if not 1 <= d <= n:
        raise DataError(f"MFA dimension must lie in 1..{n}")
    ds = LabeledDataset(X, labels, int(labels.max()))
    sets = neighbor_sets(ds, k1, k2)
    penalty = np.zeros((n, n))
    intrinsic = np.zeros((n, n))
    for W, target in ((_adjacency(sets.between, p), penalty), (_adjacency(sets.within, p), intrinsic)):
        L = np.diag(W.sum(axis=1)) - W
        target += X @ L @ X.T
    vals, vecs = scipy.linalg.eigh((penalty + penalty.T) / 2, _tikhonov((intrinsic + intrinsic.T) / 2))
    top = vecs[:, ::-1][:, :d]
    top = top / np.linalg.norm(top, axis=0)
    return DrModel("mfa", d, basis=_sign_fix(top))


def _cross_kernel(model: DrModel, X: np.ndarray) -> np.ndarray:
    train = model.train_X
    out = np.empty((train.shape[1], X.shape[1]))
    for j in range(X.shape[1]):
        out[:, j] = np.exp(-model.gamma * ((train - X[:, j : j + 1]) ** 2).sum(axis=0))
    return out


def apply_dr(model: DrModel, X: np.ndarray) -> np.ndarray:
    """Project columns of X into the learned d-dimensional space."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != model.input_dim:
        raise DataError(
            f"data has {X.shape[0] if X.ndim == 2 else '?'} rows, model expects {model.input_dim}"
        )
    if model.kind == "pca":
        return model.basis.T @ (X - model.center[:, None])
    if model.kind in ("lda", "mfa"):
        return model.basis.T @ X
    if model.kind == "kpca":
        K = _cross_kernel(model, X)
        Kc = K - K.mean(axis=0)[None, :] - model.kernel_row_mean[:, None] + model.kernel_mean
        return model.coeffs.T @ Kc
    raise DataError(f"unknown DR kind: {model.kind}")


def reconstruct_pca(model: DrModel, scores: np.ndarray) -> np.ndarray:
    """Inverse of the PCA projection (exact when out_dim == input_dim)."""
    if model.kind != "pca":
        raise DataError("reconstruction is defined for PCA models only")
    return model.basis @ scores + model.center[:, None]
