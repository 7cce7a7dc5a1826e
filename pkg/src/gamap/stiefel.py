"""First-order minimization over matrices with orthonormal columns.

Feasible points are n x m matrices U with U^T U = I. The tangent space
at U is taken as the horizontal space {xi : U^T xi = 0} with projection
(I - U U^T), which is the right notion for costs that are invariant
under U -> U Q; moving back to the manifold uses the QR retraction and
tangent vectors are transported by re-projection.

The solver is Polak-Ribiere+ conjugate gradient with Armijo
backtracking; every accepted step strictly decreases the cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import NumericalError

ORTHO_TOL = 1e-10
ORTHO_REPAIR_TOL = 1e-6
TANGENT_TOL = 1e-8


def _qr_positive(A: np.ndarray) -> np.ndarray:
    """Thin QR factor with the R diagonal forced positive (unique Q)."""
    Q, R = np.linalg.qr(A)
    d = np.abs(np.diag(R))
    if d.size and (d.max() == 0.0 or d.min() <= 1e-12 * d.max()):
        raise NumericalError("rank-deficient matrix in QR retraction")
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


@dataclass(frozen=True)
class OrthonormalFrame:
    """n x m matrix with orthonormal columns (deviation <= 1e-10).

    Construction repairs mild orthonormality loss (<= 1e-6) by
    re-orthonormalizing and rejects anything worse.
    """

    matrix: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.matrix, dtype=np.float64)
        if U.ndim != 2 or U.shape[1] > U.shape[0]:
            raise ValueError("frame must be n x m with m <= n")
        dev = np.linalg.norm(U.T @ U - np.eye(U.shape[1]))
        if dev > ORTHO_REPAIR_TOL:
            raise ValueError(f"matrix is not orthonormal (deviation {dev:.3e})")
        if dev > ORTHO_TOL:
            U = _qr_positive(U)
        object.__setattr__(self, "matrix", U)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class TangentVector:
    """Horizontal direction at a frame: base^T matrix = 0."""

    matrix: np.ndarray
    base: OrthonormalFrame

    def __post_init__(self):
        xi = np.asarray(self.matrix, dtype=np.float64)
        if xi.shape != self.base.matrix.shape:
            raise ValueError("tangent shape does not match its base frame")
        drift = np.linalg.norm(self.base.matrix.T @ xi)
        if drift > TANGENT_TOL * max(1.0, np.linalg.norm(xi)):
            raise ValueError(f"vector is not horizontal at its base (drift {drift:.3e})")
        object.__setattr__(self, "matrix", xi)


@dataclass(frozen=True)
class CgOptions:
    max_iters: int = 500
    grad_tol: float = 1e-6
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 50
    initial_step: float = 1.0

    def __post_init__(self):
        if self.grad_tol <= 0 or self.armijo_c1 <= 0 or self.initial_step <= 0:
            raise ValueError("tolerances and steps must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0.0 < self.armijo_c1 < 1.0:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if self.max_iters < 0 or self.max_backtracks < 0:
            raise ValueError("iteration counts must be non-negative")


class Termination(Enum):
    GRAD_TOL = "grad_tol"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAIL = "line_search_fail"


@dataclass(frozen=True)
class OptResult:
    frame: OrthonormalFrame
    cost: float
    grad_norm: float
    iterations: int
    cost_trace: np.ndarray
    termination: Termination


def random_frame(n: int, m: int, seed: int) -> OrthonormalFrame:
    """Seeded Gaussian matrix pushed through sign-fixed QR; deterministic."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    return OrthonormalFrame(_qr_positive(rng.standard_normal((n, m))))


def _project(U: np.ndarray, G: np.ndarray) -> np.ndarray:
    return G - U @ (U.T @ G)


def project_tangent(frame: OrthonormalFrame, G: np.ndarray) -> TangentVector:
    """(I - U U^T) G: the horizontal component of an ambient direction."""
    G = np.asarray(G, dtype=np.float64)
    if G.shape != frame.matrix.shape:
        raise ValueError("direction shape does not match the frame")
    return TangentVector(_project(frame.matrix, G), frame)


def retract(frame: OrthonormalFrame, xi: TangentVector, t: float) -> OrthonormalFrame:
    """QR retraction of U + t*xi back onto the feasible set."""
    if xi.base is not frame:
        raise ValueError("tangent vector is not based at this frame")
    return OrthonormalFrame(_qr_positive(frame.matrix + t * xi.matrix))


def transport(frame_new: OrthonormalFrame, xi: TangentVector) -> TangentVector:
    """Projection-based transport of xi into the tangent space at frame_new."""
    if xi.matrix.shape != frame_new.matrix.shape:
        raise ValueError("tangent shape does not match the target frame")
    return TangentVector(_project(frame_new.matrix, xi.matrix), frame_new)


def minimize_cg(
    cost_fn: Callable[[OrthonormalFrame], float],
    egrad_fn: Callable[[OrthonormalFrame], np.ndarray],
    U0: OrthonormalFrame,
    opts: CgOptions = CgOptions(),
    log_fn: Callable[[str], None] | None = None,
    iterate_hook: Callable[[int, OrthonormalFrame, np.ndarray], None] | None = None,
) -> OptResult:
    """Polak-Ribiere+ conjugate gradient over orthonormal frames.

    The search direction recurrence is d <- -g + beta * T(d) with
    beta = max(0, <g+, g+ - T(g)> / <g, g>) and projection transport T;
    it restarts to steepest descent whenever d stops being a descent
    direction. Armijo backtracking starts from ``opts.initial_step``
    each iteration. Terminates on the gradient norm falling below
    ``grad_tol``, on ``max_iters``, or on a failed line search.

    ``iterate_hook(k, frame, grad)`` is called at every accepted iterate
    (including the initial one) for diagnostics; ``log_fn`` receives one
    ``iter,cost,grad_norm,step`` line per iterate.
    """

    def check_finite(value: float, what: str, k: int) -> None:
        if not np.isfinite(value):
            raise NumericalError(f"non-finite {what} at iteration {k}")

    U = U0
    cost = float(cost_fn(U))
    check_finite(cost, "cost", 0)
    egrad = np.asarray(egrad_fn(U), dtype=np.float64)
    check_finite(float(np.abs(egrad).sum()), "gradient", 0)
    g = _project(U.matrix, egrad)
    g_norm = float(np.linalg.norm(g))
    trace = [cost]
    if iterate_hook is not None:
        iterate_hook(0, U, g)
    if log_fn is not None:
        log_fn(f"0,{cost!r},{g_norm!r},0.0")

    d = -g
    termination = Termination.MAX_ITERS
    iterations = 0
    for k in range(1, opts.max_iters + 1):
        if g_norm < opts.grad_tol:
            termination = Termination.GRAD_TOL
            break
        dir_deriv = float(np.sum(g * d))
        if dir_deriv >= -1e-12 * g_norm * np.linalg.norm(d):  # not a descent direction: restart
            d = -g
            dir_deriv = -g_norm**2
        step = opts.initial_step
        accepted = None
        for _ in range(opts.max_backtracks + 1):
            try:
                cand = OrthonormalFrame(_qr_positive(U.matrix + step * d))
            except NumericalError:
                step *= opts.backtrack_factor
                continue
            cand_cost = float(cost_fn(cand))
            check_finite(cand_cost, "cost", k)
            if cand_cost <= cost + opts.armijo_c1 * step * dir_deriv:
                accepted = (cand, cand_cost, step)
                break
            # shrink toward the minimizer of the interpolating parabola,
            # clamped so each trial shrinks by at least backtrack_factor
            gap = cand_cost - cost - dir_deriv * step
            if gap > 0:
                quad = -0.5 * dir_deriv * step * step / gap
                step = min(opts.backtrack_factor * step, max(0.1 * step, quad))
            else:
                step *= opts.backtrack_factor
        if accepted is None:
            termination = Termination.LINE_SEARCH_FAIL
            break
        U_new, cost_new, step = accepted
        egrad = np.asarray(egrad_fn(U_new), dtype=np.float64)
        check_finite(float(np.abs(egrad).sum()), "gradient", k)
        g_new = _project(U_new.matrix, egrad)
        g_old_t = _project(U_new.matrix, g)
        beta = max(0.0, float(np.sum(g_new * (g_new - g_old_t))) / (g_norm**2))
        d = -g_new + beta * _project(U_new.matrix, d)
        U, cost, g = U_new, cost_new, g_new
        g_norm = float(np.linalg.norm(g))
        iterations = k
        trace.append(cost)
        if iterate_hook is not None:
            iterate_hook(k, U, g)
        if log_fn is not None:
            log_fn(f"{k},{cost!r},{g_norm!r},{step!r}")
    else:
        termination = Termination.MAX_ITERS
    if g_norm < opts.grad_tol:
        termination = Termination.GRAD_TOL

    return OptResult(U, cost, g_norm, iterations, np.asarray(trace), termination)
