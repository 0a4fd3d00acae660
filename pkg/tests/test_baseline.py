"""Mixing-based gradient-free baseline."""
import numpy as np
import pytest

from zopd.baseline import RGFParams, apply_mixing, build_mixing, rgf_step, run_rgf
from zopd.engine import AlgoParams, run_centralized
from zopd.graph import Topology, build_matrices, generate_graph
from zopd.metrics import constraint_violation
from zopd.objectives import quadratic_objective, random_quadratic
from zopd.szo import SmoothingParams


def _params(**kw):
    base = dict(
        rho=6.0,
        smoothing=SmoothingParams(0.05, 4),
        total_iters=8,
        seed=77,
        init_lo=-1.0,
        init_hi=1.0,
    )
    base.update(kw)
    return AlgoParams(**base)


class TestMixingMatrix:
    def test_single_edge_weights(self):
        w = build_mixing(Topology(2, ((1, 2),), 1))
        np.testing.assert_allclose(w, [[0.5, 0.5], [0.5, 0.5]])

    def test_triangle_weights(self):
        w = build_mixing(Topology(3, ((1, 2), (2, 3), (1, 3)), 1))
        np.testing.assert_allclose(w, np.full((3, 3), 1.0 / 3.0))

    def test_star_weights(self):
        # hub degree 3 dominates every edge: off-diagonal weight 1/4
        topo = generate_graph("star", 4, block_dim=1, seed=0)
        w = build_mixing(topo)
        assert w[0, 1] == pytest.approx(0.25)
        assert w[0, 0] == pytest.approx(0.25)
        assert w[1, 1] == pytest.approx(0.75)
        assert w[1, 2] == 0.0

    def test_doubly_stochastic_and_sparse(self):
        for kind, n in (("ring", 6), ("random_connected", 9), ("complete", 5)):
            topo = generate_graph(kind, n, block_dim=1, seed=3)
            w = build_mixing(topo)
            np.testing.assert_allclose(w.sum(axis=0), np.ones(n), atol=1e-12)
            np.testing.assert_allclose(w.sum(axis=1), np.ones(n), atol=1e-12)
            np.testing.assert_array_equal(w, w.T)
            assert np.all(w >= 0)
            adjacency = np.eye(n, dtype=bool)
            for i, j in topo.edges:
                adjacency[i - 1, j - 1] = adjacency[j - 1, i - 1] = True
            assert not np.any(w[~adjacency])

    def test_consensual_input_is_exact_fixed_point(self):
        topo = generate_graph("random_connected", 7, block_dim=3, seed=5)
        w = build_mixing(topo)
        blocks = np.tile(np.array([0.1, -2.7, 3.3]), (7, 1))
        np.testing.assert_array_equal(apply_mixing(w, topo, blocks), blocks)

    def test_difference_form_equals_dense_product(self):
        topo = generate_graph("random_connected", 6, block_dim=2, seed=9)
        w = build_mixing(topo)
        blocks = np.random.default_rng(70).standard_normal((6, 2))
        np.testing.assert_allclose(apply_mixing(w, topo, blocks), w @ blocks, atol=1e-13)


class TestBaselineStep:
    def test_decay_halves_at_round_four(self):
        topo = Topology(2, ((1, 2),), 1)
        w = build_mixing(topo)
        blocks = np.full((2, 1), 0.5)  # consensual, so mixing is the identity
        grads = np.array([[1.0], [-2.0]])
        d1 = blocks - rgf_step(blocks, grads, w, topo, 0.3, 1)
        d4 = blocks - rgf_step(blocks, grads, w, topo, 0.3, 4)
        np.testing.assert_allclose(d1, 0.3 * grads)
        np.testing.assert_allclose(d4, 0.15 * grads)

    def test_round_index_counts_from_one(self):
        topo = Topology(2, ((1, 2),), 1)
        with pytest.raises(ValueError, match="round_index"):
            rgf_step(np.zeros((2, 1)), np.zeros((2, 1)), build_mixing(topo), topo, 1.0, 0)

    def test_params_rejections(self):
        with pytest.raises(ValueError, match="step_scale"):
            RGFParams(step_scale=0.0)
        with pytest.raises(ValueError, match="mu"):
            RGFParams(mu=-1.0)
        with pytest.raises(ValueError, match="total_iters"):
            RGFParams(total_iters=0)
        with pytest.raises(ValueError, match="mixing"):
            RGFParams(mixing="uniform")


class TestBaselineRun:
    def test_constant_objective_converges_to_mean(self):
        # zero gradients leave pure consensus averaging, which contracts
        # geometrically onto the initial mean and preserves it
        topo = generate_graph("ring", 5, block_dim=1, seed=0)
        objs = [quadratic_objective(np.zeros((1, 1)), np.zeros(1), -50, 50) for _ in range(5)]
        result = run_rgf(topo, objs, _params(), RGFParams(total_iters=100))
        x0 = result.states_x[0]
        target = np.full(5, np.mean(x0))
        assert np.linalg.norm(result.states_x[-1] - target) < 1e-12
        for row in result.states_x:
            assert np.mean(row) == pytest.approx(np.mean(x0), rel=1e-12)
        devs = np.linalg.norm(result.states_x - target, axis=1)
        assert np.all(devs[1:] <= devs[:-1] + 1e-15)

    def test_shares_init_stream_with_algorithm(self):
        topo = generate_graph("ring", 4, block_dim=2, seed=0)
        objs = [random_quadratic(2, seed=40 + i, box_lo=-50, box_hi=50) for i in range(4)]
        params = _params(total_iters=5)
        alg = run_centralized(topo, objs, params)
        base = run_rgf(topo, objs, params, RGFParams(step_scale=0.1, total_iters=5))
        np.testing.assert_array_equal(alg.states_x[0], base.states_x[0])
        assert not np.array_equal(alg.states_x[1], base.states_x[1])

    def test_trace_schema(self):
        topo = generate_graph("ring", 3, block_dim=1, seed=0)
        objs = [random_quadratic(1, seed=50 + i, box_lo=-50, box_hi=50) for i in range(3)]
        result = run_rgf(topo, objs, _params(), RGFParams(step_scale=0.1, total_iters=6))
        assert result.method == "rgf"
        assert [r.iteration for r in result.records] == list(range(1, 7))
        assert result.output_iteration is None
        assert result.output_x is None
        np.testing.assert_array_equal(result.states_lam, np.zeros((7, 3)))

    def test_violation_recorded_from_states(self):
        topo = generate_graph("ring", 3, block_dim=1, seed=0)
        mats = build_matrices(topo)
        objs = [random_quadratic(1, seed=50 + i, box_lo=-50, box_hi=50) for i in range(3)]
        result = run_rgf(
            topo, objs, _params(), RGFParams(step_scale=0.1, total_iters=4), mats=mats
        )
        for rec in result.records:
            expected = constraint_violation(result.states_x[rec.iteration], mats)
            assert rec.constraint_violation == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_deterministic_per_seed(self):
        topo = generate_graph("ring", 3, block_dim=1, seed=0)
        objs = [random_quadratic(1, seed=50 + i, box_lo=-50, box_hi=50) for i in range(3)]
        a = run_rgf(topo, objs, _params(), RGFParams(step_scale=0.1, total_iters=5))
        b = run_rgf(topo, objs, _params(), RGFParams(step_scale=0.1, total_iters=5))
        np.testing.assert_array_equal(a.states_x, b.states_x)
