"""Frame manifold primitives and the conjugate-gradient minimizer.

Quadratic costs tr(U^T M U) are checked against dense eigensolver
values (the minimum over orthonormal frames is the sum of the m
smallest eigenvalues of M).
"""

import numpy as np
import pytest

from gamap.errors import NumericalError
from gamap.stiefel import (
    CgOptions,
    OrthonormalFrame,
    TangentVector,
    Termination,
    minimize_cg,
    project_tangent,
    random_frame,
    retract,
    transport,
)

from helpers import random_orthogonal


def quadratic(M):
    cost_fn = lambda F: float(np.sum(F.matrix * (M @ F.matrix)))
    egrad_fn = lambda F: 2.0 * (M @ F.matrix)
    return cost_fn, egrad_fn


class TestFrames:
    def test_random_frame_orthonormal(self):
        F = random_frame(3, 3, seed=0)
        assert np.linalg.norm(F.matrix.T @ F.matrix - np.eye(3)) < 1e-12

    def test_random_frame_deterministic(self):
        a = random_frame(6, 2, seed=123)
        b = random_frame(6, 2, seed=123)
        assert np.array_equal(a.matrix, b.matrix)

    def test_wide_frame_rejected(self):
        with pytest.raises(ValueError):
            random_frame(2, 3, seed=0)

    def test_mild_violation_repaired(self):
        U = np.eye(4)[:, :2]
        U[0, 0] += 1e-8
        F = OrthonormalFrame(U)
        assert np.linalg.norm(F.matrix.T @ F.matrix - np.eye(2)) < 1e-12

    def test_gross_violation_rejected(self):
        with pytest.raises(ValueError, match="not orthonormal"):
            OrthonormalFrame(np.ones((3, 2)))


class TestTangentOps:
    def test_range_annihilated(self):
        F = random_frame(5, 2, seed=1)
        xi = project_tangent(F, F.matrix.copy())
        assert np.linalg.norm(xi.matrix) < 1e-12

    def test_horizontal_unchanged(self):
        F = random_frame(5, 2, seed=2)
        rng = np.random.default_rng(0)
        G = project_tangent(F, rng.standard_normal((5, 2))).matrix
        again = project_tangent(F, G)
        assert np.allclose(again.matrix, G, atol=1e-12)

    def test_projection_is_horizontal(self):
        rng = np.random.default_rng(3)
        F = random_frame(5, 2, seed=3)
        xi = project_tangent(F, rng.standard_normal((5, 2)))
        assert np.linalg.norm(F.matrix.T @ xi.matrix) < 1e-12

    def test_shape_mismatch(self):
        F = random_frame(5, 2, seed=4)
        with pytest.raises(ValueError):
            project_tangent(F, np.zeros((4, 2)))

    def test_transport_zero(self):
        F, G = random_frame(5, 2, seed=5), random_frame(5, 2, seed=6)
        xi = project_tangent(F, np.zeros((5, 2)))
        assert np.linalg.norm(transport(G, xi).matrix) == 0.0

    def test_transport_same_base_identity(self):
        rng = np.random.default_rng(7)
        F = random_frame(5, 2, seed=7)
        xi = project_tangent(F, rng.standard_normal((5, 2)))
        assert np.allclose(transport(F, xi).matrix, xi.matrix, atol=1e-12)

    def test_transport_result_horizontal(self):
        rng = np.random.default_rng(8)
        F, G = random_frame(6, 3, seed=8), random_frame(6, 3, seed=9)
        xi = project_tangent(F, rng.standard_normal((6, 3)))
        moved = transport(G, xi)
        assert np.linalg.norm(G.matrix.T @ moved.matrix) < 1e-10


class TestRetraction:
    def test_zero_step_is_identity(self):
        rng = np.random.default_rng(10)
        F = random_frame(6, 3, seed=10)
        xi = project_tangent(F, rng.standard_normal((6, 3)))
        back = retract(F, xi, 0.0)
        assert np.linalg.norm(back.matrix - F.matrix) < 1e-12

    def test_hand_computed_column(self):
        # qf(e1 + e2) = (e1 + e2)/sqrt(2)
        F = OrthonormalFrame(np.array([[1.0], [0.0], [0.0]]))
        xi = TangentVector(np.array([[0.0], [1.0], [0.0]]), F)
        out = retract(F, xi, 1.0)
        assert np.allclose(out.matrix[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2), 0.0])

    def test_output_feasible(self):
        rng = np.random.default_rng(11)
        for seed in range(5):
            F = random_frame(7, 3, seed=seed)
            xi = project_tangent(F, rng.standard_normal((7, 3)))
            out = retract(F, xi, 0.7)
            assert np.linalg.norm(out.matrix.T @ out.matrix - np.eye(3)) < 1e-10

    def test_foreign_base_rejected(self):
        F, G = random_frame(5, 2, seed=12), random_frame(5, 2, seed=13)
        xi = project_tangent(F, np.zeros((5, 2)))
        with pytest.raises(ValueError):
            retract(G, xi, 1.0)


class TestMinimizeCg:
    def test_smallest_eigenpair(self):
        cost_fn, egrad_fn = quadratic(np.diag([1.0, 2.0, 3.0]))
        res = minimize_cg(cost_fn, egrad_fn, random_frame(3, 1, seed=0))
        assert res.cost == pytest.approx(1.0, abs=1e-6)
        assert abs(res.frame.matrix[0, 0]) == pytest.approx(1.0, abs=1e-4)

    def test_ky_fan_two_dims(self):
        cost_fn, egrad_fn = quadratic(np.diag([1.0, 2.0, 3.0]))
        res = minimize_cg(cost_fn, egrad_fn, random_frame(3, 2, seed=1))
        assert res.cost == pytest.approx(3.0, abs=1e-6)

    def test_random_instance_against_eigensolver(self):
        rng = np.random.default_rng(21)
        B = rng.standard_normal((8, 8))
        M = (B + B.T) / 2
        cost_fn, egrad_fn = quadratic(M)
        best = min(
            minimize_cg(cost_fn, egrad_fn, random_frame(8, 3, seed=s)).cost for s in range(5)
        )
        target = float(np.sort(np.linalg.eigvalsh(M))[:3].sum())
        assert best == pytest.approx(target, rel=1e-6, abs=1e-8)

    def test_iterates_feasible_and_tangent(self):
        rng = np.random.default_rng(22)
        B = rng.standard_normal((6, 6))
        M = (B + B.T) / 2
        cost_fn, egrad_fn = quadratic(M)
        records = []
        minimize_cg(
            cost_fn, egrad_fn, random_frame(6, 2, seed=3),
            iterate_hook=lambda k, F, g: records.append((F, g)),
        )
        assert records
        for F, g in records:
            assert np.linalg.norm(F.matrix.T @ F.matrix - np.eye(2)) < 1e-10
            assert np.linalg.norm(F.matrix.T @ g) < 1e-8

    def test_trace_monotone_and_strictly_decreasing(self):
        rng = np.random.default_rng(23)
        B = rng.standard_normal((7, 7))
        cost_fn, egrad_fn = quadratic((B + B.T) / 2)
        res = minimize_cg(cost_fn, egrad_fn, random_frame(7, 2, seed=4))
        diffs = np.diff(res.cost_trace)
        assert np.all(diffs < 0)
        assert res.cost == res.cost_trace[-1]
        assert res.iterations == len(res.cost_trace) - 1

    def test_full_square_frame_stops_immediately(self):
        cost_fn, egrad_fn = quadratic(np.diag([1.0, 2.0, 3.0]))
        res = minimize_cg(cost_fn, egrad_fn, random_frame(3, 3, seed=5))
        assert res.termination is Termination.GRAD_TOL
        assert res.iterations == 0
        assert res.cost == pytest.approx(6.0, rel=1e-12)

    def test_line_search_failure_reported(self):
        cost_fn, egrad_fn = quadratic(np.diag([1.0, 2.0, 3.0]))
        opts = CgOptions(initial_step=1e6, max_backtracks=0)
        res = minimize_cg(cost_fn, egrad_fn, random_frame(3, 1, seed=6), opts)
        assert res.termination is Termination.LINE_SEARCH_FAIL

    def test_non_finite_cost_raises_with_iteration(self):
        cost_fn = lambda F: float("nan")
        egrad_fn = lambda F: np.zeros_like(F.matrix)
        with pytest.raises(NumericalError, match="iteration 0"):
            minimize_cg(cost_fn, egrad_fn, random_frame(3, 1, seed=7))

    def test_grad_tol_termination(self):
        cost_fn, egrad_fn = quadratic(np.diag([1.0, 5.0]))
        res = minimize_cg(cost_fn, egrad_fn, random_frame(2, 1, seed=8))
        assert res.termination is Termination.GRAD_TOL
        assert res.grad_norm < CgOptions().grad_tol

    def test_rotated_start_same_optimum(self):
        rng = np.random.default_rng(25)
        B = rng.standard_normal((6, 6))
        M = (B + B.T) / 2
        cost_fn, egrad_fn = quadratic(M)
        F0 = random_frame(6, 3, seed=9)
        rotated = OrthonormalFrame(F0.matrix @ random_orthogonal(rng, 3))
        a = minimize_cg(cost_fn, egrad_fn, F0)
        b = minimize_cg(cost_fn, egrad_fn, rotated)
        assert a.cost == pytest.approx(b.cost, rel=1e-8, abs=1e-9)
