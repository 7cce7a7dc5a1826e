"""Mapping cost/gradient/fit against brute-force and spectral oracles."""

import numpy as np
import pytest

from gamap.affinity import NeighborSets, build_affinity, neighbor_sets
from gamap.dataset import LabeledDataset
from gamap.errors import ConfigError, DataError
from gamap.mapping import (
    GamModel,
    GamParams,
    cost,
    euclidean_gradient,
    fingerprint,
    fit,
    graph_quadratic,
    load_model,
    save_model,
    spectral_oracle,
    transform,
    transform_dataset,
)
from gamap.stiefel import CgOptions, OrthonormalFrame, random_frame

from helpers import make_ds, random_labeled, random_orthogonal


def pair_graph(values):
    """Affinity graph over p points from a dense symmetric value matrix."""
    import scipy.sparse

    A = np.asarray(values, dtype=np.int8)
    sets = NeighborSets([np.array([], dtype=int)] * A.shape[0],
                        [np.array([], dtype=int)] * A.shape[0], 1, 1, False)
    from gamap.affinity import AffinityGraph

    return AffinityGraph(scipy.sparse.csr_matrix(A), sets, np.ones(A.shape[0], dtype=np.int64))


def double_sum_cost(U, X, A):
    """Literal ordered-pair evaluation of the signed projection cost."""
    Z = U.T @ X
    total = 0.0
    for i in range(X.shape[1]):
        for j in range(X.shape[1]):
            total += A[i, j] * float(np.sum((Z[:, i] - Z[:, j]) ** 2))
    return total


def random_instance(rng, n, p, n_classes=3, vw=2, vb=2):
    ds = random_labeled(rng, n, p, n_classes)
    graph = build_affinity(neighbor_sets(ds, vw, vb), ds.labels)
    return ds, graph


class TestCost:
    def test_single_within_pair(self):
        X = np.array([[0.0, 1.0], [0.0, 0.0]])
        graph = pair_graph([[0, 1], [1, 0]])
        U = OrthonormalFrame(np.array([[1.0], [0.0]]))
        assert cost(U, X, graph) == pytest.approx(2.0, abs=1e-14)

    def test_orthogonal_direction_zero(self):
        X = np.array([[0.0, 1.0], [0.0, 0.0]])
        graph = pair_graph([[0, 1], [1, 0]])
        U = OrthonormalFrame(np.array([[0.0], [1.0]]))
        assert cost(U, X, graph) == pytest.approx(0.0, abs=1e-14)

    def test_trace_form_equals_double_sum(self):
        rng = np.random.default_rng(0)
        ds, graph = random_instance(rng, n=5, p=12)
        U = random_frame(5, 2, seed=1)
        direct = double_sum_cost(U.matrix, ds.features, graph.entries.toarray())
        assert cost(U, ds.features, graph) == pytest.approx(direct, rel=1e-10, abs=1e-10)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(1)
        ds, graph = random_instance(rng, n=6, p=15)
        U = random_frame(6, 3, seed=2)
        base = cost(U, ds.features, graph)
        for _ in range(10):
            Q = random_orthogonal(rng, 3)
            rotated = cost(OrthonormalFrame(U.matrix @ Q), ds.features, graph)
            assert abs(rotated - base) < 1e-10 * max(1.0, abs(base))

    def test_shape_mismatch(self):
        rng = np.random.default_rng(2)
        ds, graph = random_instance(rng, n=5, p=12)
        with pytest.raises(DataError):
            cost(random_frame(4, 2, seed=0), ds.features, graph)


class TestEuclideanGradient:
    def test_matches_central_differences(self):
        rng = np.random.default_rng(3)
        ds, graph = random_instance(rng, n=6, p=10)
        U = random_frame(6, 2, seed=3)
        grad = euclidean_gradient(U, ds.features, graph)
        A = graph.entries.toarray()
        h = 1e-6
        fd = np.zeros_like(grad)
        for a in range(6):
            for b in range(2):
                up, dn = U.matrix.copy(), U.matrix.copy()
                up[a, b] += h
                dn[a, b] -= h
                fd[a, b] = (double_sum_cost(up, ds.features, A)
                            - double_sum_cost(dn, ds.features, A)) / (2 * h)
        scale = np.maximum(np.abs(grad), 1e-6 * np.abs(grad).max())
        assert np.max(np.abs(fd - grad) / scale) < 1e-5

    def test_zero_graph_zero_gradient(self):
        X = np.random.default_rng(4).standard_normal((4, 6))
        graph = pair_graph(np.zeros((6, 6), dtype=int))
        U = random_frame(4, 2, seed=4)
        assert np.array_equal(euclidean_gradient(U, X, graph), np.zeros((4, 2)))

    def test_rotation_covariance(self):
        rng = np.random.default_rng(5)
        ds, graph = random_instance(rng, n=5, p=12)
        U = random_frame(5, 2, seed=5)
        Q = random_orthogonal(rng, 2)
        lhs = euclidean_gradient(OrthonormalFrame(U.matrix @ Q), ds.features, graph)
        rhs = euclidean_gradient(U, ds.features, graph) @ Q
        assert np.allclose(lhs, rhs, atol=1e-10)


class TestSpectralOracle:
    def chain_instance(self):
        # edges (0,1) and (1,2) with difference vectors 2*e1 and 3*e2
        X = np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 3.0], [0.0, 0.0, 0.0]])
        graph = pair_graph([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        return X, graph

    def test_diagonal_quadratic_picks_axes(self):
        X, graph = self.chain_instance()
        M = graph_quadratic(X, graph)
        assert np.allclose(M, np.diag([4.0, 9.0, 0.0]))
        frame, value = spectral_oracle(X, graph, 1)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert abs(frame.matrix[2, 0]) == pytest.approx(1.0, abs=1e-12)
        frame2, value2 = spectral_oracle(X, graph, 2)
        assert value2 == pytest.approx(8.0, abs=1e-12)
        assert np.allclose(np.abs(frame2.matrix[[2, 0], [0, 1]]), 1.0)

    def test_lower_bounds_random_frames(self):
        rng = np.random.default_rng(6)
        ds, graph = random_instance(rng, n=6, p=14)
        _, value = spectral_oracle(ds.features, graph, 2)
        for seed in range(100):
            assert value <= cost(random_frame(6, 2, seed=seed), ds.features, graph) + 1e-9

    def test_rotation_invariant(self):
        rng = np.random.default_rng(7)
        ds, graph = random_instance(rng, n=5, p=12)
        frame, value = spectral_oracle(ds.features, graph, 2)
        Q = random_orthogonal(rng, 2)
        assert cost(OrthonormalFrame(frame.matrix @ Q), ds.features, graph) == pytest.approx(
            value, rel=1e-10, abs=1e-10
        )


class TestFit:
    def separated_gaussians(self, seed=0):
        rng = np.random.default_rng(seed)
        a = np.array([[0.0], [0.0]]) + 0.3 * rng.standard_normal((2, 30))
        b = np.array([[4.0], [0.0]]) + 0.3 * rng.standard_normal((2, 30))
        return make_ds(np.hstack([a, b]), [1] * 30 + [2] * 30)

    def test_projection_separates_neighbor_pairs(self):
        ds = self.separated_gaussians()
        model = fit(ds, GamParams(n_within=5, n_between=5, target_dim=1, seed=1))
        z = transform(model, ds.features)[0]
        sets = neighbor_sets(ds, 5, 5)
        within_d = [abs(z[i] - z[j]) for i in range(60) for j in sets.within[i]]
        between_d = [abs(z[i] - z[j]) for i in range(60) for j in sets.between[i]]
        threshold = np.mean(between_d)
        assert np.mean([d < threshold for d in within_d]) >= 0.95

    def test_descent_from_every_restart(self):
        rng = np.random.default_rng(8)
        ds, graph = random_instance(rng, n=6, p=18)
        params = GamParams(n_within=2, n_between=2, target_dim=3, restarts=3, seed=5)
        model = fit(ds, params)
        seeds = np.random.SeedSequence(5).generate_state(3, dtype=np.uint64)
        for s in seeds:
            start = cost(random_frame(6, 3, seed=int(s)), ds.features, graph)
            assert model.final_cost <= start + 1e-12

    def test_reaches_spectral_optimum(self):
        rng = np.random.default_rng(9)
        for trial in range(3):
            ds = random_labeled(rng, n=7, p=20, n_classes=3)
            params = GamParams(n_within=2, n_between=2, target_dim=2, seed=trial)
            model = fit(ds, params)
            graph = build_affinity(neighbor_sets(ds, 2, 2), ds.labels)
            _, opt = spectral_oracle(ds.features, graph, 2)
            assert model.final_cost >= opt - 1e-9
            assert model.final_cost <= opt + 1e-4 * abs(opt) + 1e-8

    def test_deterministic(self):
        ds = self.separated_gaussians(seed=3)
        params = GamParams(target_dim=1, seed=11)
        a, b = fit(ds, params), fit(ds, params)
        assert np.array_equal(a.frame.matrix, b.frame.matrix)
        assert a.final_cost == b.final_cost

    def test_final_cost_consistent_with_cost_fn(self):
        ds = self.separated_gaussians(seed=4)
        model = fit(ds, GamParams(n_within=4, n_between=4, target_dim=1, seed=2))
        graph = build_affinity(neighbor_sets(ds, 4, 4), ds.labels)
        recomputed = cost(model.frame, ds.features, graph)
        assert model.final_cost == pytest.approx(recomputed, rel=1e-10)

    def test_target_dim_out_of_range(self):
        ds = self.separated_gaussians(seed=5)
        with pytest.raises(ConfigError):
            fit(ds, GamParams(target_dim=3))

    def test_degenerate_graph_returns_initial_frame(self, monkeypatch):
        ds = self.separated_gaussians(seed=6)
        empty = NeighborSets(
            [np.array([], dtype=int)] * 60, [np.array([], dtype=int)] * 60, 1, 1, True
        )
        monkeypatch.setattr("gamap.mapping.neighbor_sets", lambda *a, **k: empty)
        model = fit(ds, GamParams(target_dim=1, seed=7))
        assert model.degenerate_graph
        assert model.final_cost == 0.0
        seeds = np.random.SeedSequence(7).generate_state(3, dtype=np.uint64)
        assert np.array_equal(model.frame.matrix, random_frame(2, 1, int(seeds[0])).matrix)

    def test_truncation_flag_propagates(self):
        ds = make_ds([[0.0, 1.0, 2.0, 3.0]], [1, 1, 1, 2])
        model = fit(ds, GamParams(n_within=5, n_between=1, target_dim=1, seed=0))
        assert model.truncated_neighbors


class TestTransform:
    def test_identity_frame(self):
        ds = make_ds(np.random.default_rng(10).standard_normal((3, 5)), [1, 1, 2, 2, 1])
        model = GamModel(OrthonormalFrame(np.eye(3)), GamParams(target_dim=3), 0.0, None, "x")
        assert np.array_equal(transform(model, ds.features), ds.features)

    def test_never_expands_distances(self):
        rng = np.random.default_rng(11)
        model = GamModel(random_frame(6, 3, seed=12), GamParams(target_dim=3), 0.0, None, "x")
        X = rng.standard_normal((6, 10))
        Z = transform(model, X)
        for i in range(10):
            for j in range(10):
                din = np.linalg.norm(X[:, i] - X[:, j])
                dout = np.linalg.norm(Z[:, i] - Z[:, j])
                assert dout <= din + 1e-12

    def test_hand_multiply(self):
        rng = np.random.default_rng(12)
        ds = random_labeled(rng, n=3, p=12, n_classes=2)
        model = fit(ds, GamParams(n_within=2, n_between=2, seed=3))
        x = rng.standard_normal((3, 1))
        expected = np.array(
            [[sum(model.frame.matrix[a, b] * x[a, 0] for a in range(3))] for b in range(2)]
        )
        assert np.allclose(transform(model, x), expected, atol=1e-12)

    def test_dimension_mismatch(self):
        model = GamModel(random_frame(4, 2, seed=13), GamParams(target_dim=2), 0.0, None, "x")
        with pytest.raises(DataError):
            transform(model, np.zeros((3, 5)))

    def test_transform_dataset_keeps_labels(self):
        rng = np.random.default_rng(13)
        ds = random_labeled(rng, n=4, p=10, n_classes=2)
        model = GamModel(random_frame(4, 2, seed=14), GamParams(target_dim=2), 0.0, None, "x")
        out = transform_dataset(model, ds)
        assert out.dim == 2 and np.array_equal(out.labels, ds.labels)


class TestModelSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(14)
        ds = random_labeled(rng, n=5, p=16, n_classes=2)
        params = GamParams(
            n_within=3, n_between=2, target_dim=3, restarts=2, seed=21,
            cg=CgOptions(max_iters=200, grad_tol=1e-7),
        )
        model = fit(ds, params)
        path = tmp_path / "model.gam"
        save_model(model, path)
        back = load_model(path)
        assert back.frame.matrix.tobytes() == model.frame.matrix.tobytes()
        assert back.params == model.params
        assert back.final_cost == model.final_cost
        assert back.train_fingerprint == model.train_fingerprint
        assert back.opt_result is None

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.gam"
        path.write_bytes(b"not a model")
        with pytest.raises(DataError):
            load_model(path)

    def test_fingerprint_distinguishes_data(self):
        rng = np.random.default_rng(15)
        a = random_labeled(rng, n=4, p=10, n_classes=2)
        b = random_labeled(rng, n=4, p=10, n_classes=2)
        assert fingerprint(a) != fingerprint(b)
