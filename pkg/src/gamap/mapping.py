"""The geometry-aware mapping: learn an orthonormal projection U that
pulls within-class neighbors together and pushes between-class
neighbors apart.

With signed affinity A and its Laplacian L = D - A, the cost over all
ordered sample pairs

    sum_ij A_ij || U^T x_i - U^T x_j ||^2  =  2 tr(U^T X L X^T U)

is minimized over U^T U = I by conjugate gradient on the frame
manifold; the exact minimizer (eigenvectors of the m smallest
eigenvalues of X L X^T) is available as a test oracle.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .affinity import AffinityGraph, build_affinity, neighbor_sets, signed_laplacian
from .dataset import LabeledDataset
from .errors import ConfigError, DataError, NumericalError
from .stiefel import (
    CgOptions,
    OptResult,
    OrthonormalFrame,
    Termination,
    minimize_cg,
    random_frame,
)

MODEL_MAGIC = "GAMAP-MODEL 1"


@dataclass(frozen=True)
class GamParams:
    """Mapping hyperparameters. ``target_dim=None`` means n - 1."""

    n_within: int = 9
    n_between: int = 9
    target_dim: int | None = None
    restarts: int = 3
    seed: int = 0
    cg: CgOptions = field(default_factory=CgOptions)

    def __post_init__(self):
        if self.n_within < 1 or self.n_between < 1:
            raise ConfigError("neighbor counts must be >= 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.target_dim is not None and self.target_dim < 1:
            raise ConfigError("target_dim must be >= 1")


@dataclass(frozen=True)
class GamModel:
    """Fitted projection frame plus fitting metadata."""

    frame: OrthonormalFrame
    params: GamParams
    final_cost: float
    opt_result: OptResult | None
    train_fingerprint: str
    degenerate_graph: bool = False
    truncated_neighbors: bool = False

    @property
    def input_dim(self) -> int:
        return self.frame.n

    @property
    def output_dim(self) -> int:
        return self.frame.m


def graph_quadratic(X: np.ndarray, graph: AffinityGraph) -> np.ndarray:
    """The n x n matrix X (D - A) X^T behind cost and gradient."""
    if X.shape[1] != graph.size:
        raise DataError("affinity size does not match the number of samples")
    M = X @ signed_laplacian(graph) @ X.T
    return (M + M.T) / 2.0


def cost(frame: OrthonormalFrame, X: np.ndarray, graph: AffinityGraph) -> float:
    """Signed pairwise projection cost, evaluated in trace form.

    Counts ordered pairs (each unordered pair twice); may be negative.
    """
    if frame.n != X.shape[0]:
        raise DataError("frame rows do not match the feature dimension")
    M = graph_quadratic(X, graph)
    return 2.0 * float(np.sum(frame.matrix * (M @ frame.matrix)))


def euclidean_gradient(frame: OrthonormalFrame, X: np.ndarray, graph: AffinityGraph) -> np.ndarray:
    """Gradient of `cost` with respect to U as an unconstrained matrix: 4 X L X^T U."""
    if frame.n != X.shape[0]:
        raise DataError("frame rows do not match the feature dimension")
    M = graph_quadratic(X, graph)
    return 4.0 * (M @ frame.matrix)


def spectral_oracle(X: np.ndarray, graph: AffinityGraph, m: int) -> tuple[OrthonormalFrame, float]:
    """Exact minimizer of the cost from a dense symmetric eigendecomposition.

    The minimizing frame spans the eigenvectors of the m smallest
    eigenvalues of X L X^T; the optimal cost is twice their sum.
    """
    M = graph_quadratic(X, graph)
    if not np.all(np.isfinite(M)):
        raise NumericalError("non-finite entries in the graph quadratic form")
    vals, vecs = np.linalg.eigh(M)
    if not 1 <= m <= M.shape[0]:
        raise DataError(f"need 1 <= m <= {M.shape[0]}, got {m}")
    return OrthonormalFrame(vecs[:, :m]), 2.0 * float(vals[:m].sum())


def fingerprint(ds: LabeledDataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.features).tobytes())
    h.update(np.ascontiguousarray(ds.labels).tobytes())
    return h.hexdigest()


def fit(
    train: LabeledDataset,
    params: GamParams = GamParams(),
    log_fn=None,
    iterate_hook=None,
) -> GamModel:
    """Learn the projection on a training set.

    Builds the signed neighbor graph, then runs ``params.restarts``
    seeded conjugate-gradient minimizations from random frames and keeps
    the lowest cost. Deterministic for fixed (train, params). If the
    graph comes out empty (everything truncated away) the objective is
    identically zero and the first random frame is returned as-is.
    """
    n = train.dim
    m = n - 1 if params.target_dim is None else params.target_dim
    if not 1 <= m <= n:
        raise ConfigError(f"target_dim must lie in 1..{n}, got {m}")
    sets = neighbor_sets(train, params.n_within, params.n_between)
    graph = build_affinity(sets, train.labels)
    fp = fingerprint(train)
    seeds = np.random.SeedSequence(params.seed).generate_state(params.restarts, dtype=np.uint64)

    if graph.entries.nnz == 0:
        frame = random_frame(n, m, int(seeds[0]))
        empty = OptResult(frame, 0.0, 0.0, 0, np.asarray([0.0]), Termination.GRAD_TOL)
        return GamModel(frame, params, 0.0, empty, fp, True, sets.truncated)

    M = graph_quadratic(train.features, graph)

    def cost_fn(frame: OrthonormalFrame) -> float:
        return 2.0 * float(np.sum(frame.matrix * (M @ frame.matrix)))

    def egrad_fn(frame: OrthonormalFrame) -> np.ndarray:
        return 4.0 * (M @ frame.matrix)

    best: OptResult | None = None
    for r, seed in enumerate(seeds):
        if log_fn is not None:
            log_fn(f"# restart {r}")
        result = minimize_cg(
            cost_fn, egrad_fn, random_frame(n, m, int(seed)), params.cg,
            log_fn=log_fn, iterate_hook=iterate_hook,
        )
        if best is None or result.cost < best.cost:
            best = result
    return GamModel(best.frame, params, best.cost, best, fp, False, sets.truncated)


def transform(model: GamModel, X: np.ndarray) -> np.ndarray:
    """Project columns of X into the learned space: U^T X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != model.input_dim:
        raise DataError(
            f"data has {X.shape[0] if X.ndim == 2 else '?'} rows, model expects {model.input_dim}"
        )
    return model.frame.matrix.T @ X


def transform_dataset(model: GamModel, ds: LabeledDataset) -> LabeledDataset:
    """`transform` applied to a dataset, keeping labels."""
    return LabeledDataset(transform(model, ds.features), ds.labels, ds.class_count, ds.label_map)


def save_model(model: GamModel, path) -> None:
    """Text header plus the frame as row-major little-endian float64.

    Round-trips bit-exactly: the frame is written raw and floats in the
    header use repr (shortest exact decimal).
    """
    p = model.params
    header = io.StringIO()
    header.write(MODEL_MAGIC + "\n")
    header.write(f"n {model.input_dim}\n")
    header.write(f"m {model.output_dim}\n")
    header.write(f"n_within {p.n_within}\n")
    header.write(f"n_between {p.n_between}\n")
    header.write(f"target_dim {'auto' if p.target_dim is None else p.target_dim}\n")
    header.write(f"restarts {p.restarts}\n")
    header.write(f"seed {p.seed}\n")
    header.write(f"cg_max_iters {p.cg.max_iters}\n")
    header.write(f"cg_grad_tol {p.cg.grad_tol!r}\n")
    header.write(f"cg_armijo_c1 {p.cg.armijo_c1!r}\n")
    header.write(f"cg_backtrack_factor {p.cg.backtrack_factor!r}\n")
    header.write(f"cg_max_backtracks {p.cg.max_backtracks}\n")
    header.write(f"cg_initial_step {p.cg.initial_step!r}\n")
    header.write(f"final_cost {model.final_cost!r}\n")
    header.write(f"train_fingerprint {model.train_fingerprint}\n")
    header.write(f"degenerate_graph {int(model.degenerate_graph)}\n")
    header.write(f"truncated_neighbors {int(model.truncated_neighbors)}\n")
    header.write("END\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("utf-8"))
        fh.write(np.ascontiguousarray(model.frame.matrix, dtype="<f8").tobytes())


def load_model(path) -> GamModel:
    """Inverse of `save_model`; the optimizer trace is not persisted."""
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"END\n")
    if not blob.startswith(MODEL_MAGIC.encode()) or end < 0:
        raise DataError(f"{path}: not a mapping model file")
    kv: dict[str, str] = {}
    for line in blob[: end].decode("utf-8").splitlines()[1:]:
        key, _, value = line.partition(" ")
        kv[key] = value
    try:
        n, m = int(kv["n"]), int(kv["m"])
        params = GamParams(
            n_within=int(kv["n_within"]),
            n_between=int(kv["n_between"]),
            target_dim=None if kv["target_dim"] == "auto" else int(kv["target_dim"]),
            restarts=int(kv["restarts"]),
            seed=int(kv["seed"]),
            cg=CgOptions(
                max_iters=int(kv["cg_max_iters"]),
                grad_tol=float(kv["cg_grad_tol"]),
                armijo_c1=float(kv["cg_armijo_c1"]),
                backtrack_factor=float(kv["cg_backtrack_factor"]),
                max_backtracks=int(kv["cg_max_backtracks"]),
                initial_step=float(kv["cg_initial_step"]),
            ),
        )
        final_cost = float(kv["final_cost"])
        fp = kv["train_fingerprint"]
        degenerate = bool(int(kv["degenerate_graph"]))
        truncated = bool(int(kv["truncated_neighbors"]))
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed model header ({exc})") from None
    raw = blob[end + 4 :]
    if len(raw) != n * m * 8:
        raise DataError(f"{path}: frame payload is {len(raw)} bytes, expected {n * m * 8}")
    U = np.frombuffer(raw, dtype="<f8").reshape(n, m).copy()
    return GamModel(OrthonormalFrame(U), params, final_cost, None, fp, degenerate, truncated)
