"""Benchmark objective families and their declared analytic data."""
import math

import numpy as np
import pytest

from zopd.objectives import (
    Box,
    ClassificationData,
    StackedObjective,
    estimate_lipschitz,
    logistic_regression_objective,
    quadratic_objective,
    random_quadratic,
    read_classification_csv,
    synthesize_classification_data,
    toy_objective,
    write_classification_csv,
)


def _gaussian_smoothed_mc(value_many, x, mu, samples, seed):
    """Independent Monte-Carlo oracle for the smoothed value and gradient.

    Draws its own standard normal perturbations and averages the defining
    expectations directly, without going through the estimator module.
    Returns (value, value_se, grad, grad_se).
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, samples)))
    phis = rng.standard_normal((samples, x.size))
    pert = value_many(x[None, :] + mu * phis)
    base = float(value_many(x[None, :])[0])
    val = float(np.mean(pert))
    val_se = float(np.std(pert) / math.sqrt(samples))
    g_samples = ((pert - base) / mu)[:, None] * phis
    grad = g_samples.mean(axis=0)
    grad_se = g_samples.std(axis=0) / math.sqrt(samples)
    return val, val_se, grad, grad_se


class TestToyObjective:
    def test_value_examples(self):
        obj = toy_objective()
        assert obj.value(np.array([0.0])) == pytest.approx(2.0, abs=1e-15)
        expected_pi = abs(math.cos(math.pi) + math.pi + math.exp(math.pi))
        assert obj.value(np.array([math.pi])) == pytest.approx(expected_pi, rel=1e-15)

    def test_kink_at_zero(self):
        # one-sided difference quotients straddling the |x| kink
        obj = toy_objective()
        h = 1e-6
        right = (obj.value(np.array([h])) - obj.value(np.array([0.0]))) / h
        left = (obj.value(np.array([0.0])) - obj.value(np.array([-h]))) / h
        assert right == pytest.approx(2.0, abs=1e-4)
        assert left == pytest.approx(0.0, abs=1e-4)
        assert right - left > 1.5

    @pytest.mark.parametrize("x,mu", [(1.0, 0.5), (-0.7, 0.5), (0.3, 0.8), (1.0, 0.01)])
    def test_closed_smoothed_value_matches_mc(self, x, mu):
        obj = toy_objective()
        val, val_se, _, _ = _gaussian_smoothed_mc(
            obj.value_many, np.array([x]), mu, 2 * 10**6, seed=5
        )
        closed = obj.smoothed_value(np.array([x]), mu)
        assert abs(closed - val) < 4.0 * val_se + 1e-12

    @pytest.mark.parametrize("x,mu", [(1.0, 0.5), (-0.7, 0.5), (0.3, 0.8)])
    def test_closed_smoothed_gradient_matches_mc(self, x, mu):
        obj = toy_objective()
        _, _, grad, grad_se = _gaussian_smoothed_mc(
            obj.value_many, np.array([x]), mu, 4 * 10**6, seed=6
        )
        closed = obj.smoothed_gradient(np.array([x]), mu)
        assert abs(closed[0] - grad[0]) < 4.0 * grad_se[0]

    def test_closed_gradient_differentiates_closed_value(self):
        # the two closed forms must agree as derivative and antiderivative
        obj = toy_objective()
        for x in (-2.0, -0.5, 0.0, 0.4, 1.7):
            for mu in (0.05, 0.3):
                h = 1e-6
                fd = (
                    obj.smoothed_value(np.array([x + h]), mu)
                    - obj.smoothed_value(np.array([x - h]), mu)
                ) / (2 * h)
                g = obj.smoothed_gradient(np.array([x]), mu)[0]
                assert g == pytest.approx(fd, rel=1e-7, abs=1e-7)

    def test_lipschitz_and_lower_bound_audit(self):
        obj = toy_objective()
        sampled = estimate_lipschitz(obj.value_many, obj.box, samples=10**5, seed=91)
        assert sampled <= obj.lipschitz_l0
        rng = np.random.default_rng(12)
        pts = rng.uniform(obj.box.lo, obj.box.hi, size=(10**5, 1))
        assert float(np.min(obj.value_many(pts))) >= obj.lower_bound

    def test_phase_shift_disables_closed_forms(self):
        shifted = toy_objective(phase=0.4)
        assert shifted.smoothed_gradient is None
        assert shifted.smoothed_value is None
        assert shifted.value(np.array([0.0])) == pytest.approx(
            abs(math.cos(0.4) + 1.0), rel=1e-15
        )


class TestLogisticRegression:
    def _tiny(self, batch=4, dim=3, seed=0):
        rng = np.random.default_rng(seed)
        return ClassificationData(
            rng.standard_normal((batch, dim)),
            np.where(rng.uniform(size=batch) < 0.5, 1.0, -1.0),
        )

    def test_value_at_origin_alpha_zero(self):
        data = self._tiny()
        obj = logistic_regression_objective(data, num_agents=3, alpha=0.0)
        assert obj.value(np.zeros(3)) == pytest.approx(math.log(2.0) / 3.0, rel=1e-14)

    def test_value_at_origin_unit_epsilon(self):
        # log(eps + 0) vanishes at eps=1, so the regularizer adds nothing
        data = self._tiny()
        plain = logistic_regression_objective(data, num_agents=3, alpha=0.0)
        reg = logistic_regression_objective(data, num_agents=3, alpha=1.0, epsilon=1.0)
        assert reg.value(np.zeros(3)) == pytest.approx(plain.value(np.zeros(3)), rel=1e-14)

    def test_single_point_margin(self):
        data = ClassificationData(np.array([[1.0, 0.0]]), np.array([1.0]))
        obj = logistic_regression_objective(data, num_agents=5, alpha=0.0)
        expected = math.log(1.0 + math.exp(-10.0)) / 5.0
        assert obj.value(np.array([10.0, 0.0])) == pytest.approx(expected, rel=1e-12)

    def test_matches_plain_python_recomputation(self):
        """Loop-based reimplementation of the same formula as an oracle."""
        data = self._tiny(batch=6, dim=4, seed=3)
        alpha, eps, n = 0.25, 1e-2, 4
        obj = logistic_regression_objective(data, num_agents=n, alpha=alpha, epsilon=eps)
        rng = np.random.default_rng(7)
        for x in rng.uniform(-2, 2, size=(20, 4)):
            loss = 0.0
            for v, y in zip(data.features, data.labels):
                loss += math.log1p(math.exp(-y * float(np.dot(x, v))))
            loss += alpha * math.log(eps + float(np.sum(np.abs(x))))
            expected = loss / (n * data.batch)
            assert obj.value(x) == pytest.approx(expected, rel=1e-12)

    def test_lipschitz_and_lower_bound_audit(self):
        data = self._tiny(batch=16, dim=3, seed=5)
        obj = logistic_regression_objective(data, num_agents=2)
        sampled = estimate_lipschitz(obj.value_many, obj.box, samples=10**5, seed=31)
        assert sampled <= obj.lipschitz_l0
        rng = np.random.default_rng(8)
        pts = rng.uniform(obj.box.lo, obj.box.hi, size=(10**5, 3))
        assert float(np.min(obj.value_many(pts))) >= obj.lower_bound

    def test_parameter_rejections(self):
        data = self._tiny()
        with pytest.raises(ValueError, match="epsilon"):
            logistic_regression_objective(data, 2, epsilon=0.0)
        with pytest.raises(ValueError, match="alpha"):
            logistic_regression_objective(data, 2, alpha=-0.1)
        with pytest.raises(ValueError, match="label"):
            ClassificationData(np.zeros((2, 2)), np.array([1.0, 0.5]))


class TestSynthesizedData:
    def test_paper_scale_shapes(self):
        datasets, planted = synthesize_classification_data(15, 100, 10, seed=1)
        assert len(datasets) == 15
        for ds in datasets:
            assert ds.features.shape == (100, 10)
            assert set(np.unique(ds.labels)) <= {-1.0, 1.0}
        assert planted.shape == (10,)
        assert np.count_nonzero(planted) == math.ceil(10 / 4)

    def test_zero_flip_probability_labels_planted(self):
        datasets, planted = synthesize_classification_data(3, 50, 6, seed=2, flip_prob=0.0)
        for ds in datasets:
            np.testing.assert_array_equal(
                ds.labels, np.where(ds.features @ planted >= 0.0, 1.0, -1.0)
            )

    def test_determinism(self):
        a, pa = synthesize_classification_data(4, 20, 8, seed=9)
        b, pb = synthesize_classification_data(4, 20, 8, seed=9)
        np.testing.assert_array_equal(pa, pb)
        for da, db in zip(a, b):
            np.testing.assert_array_equal(da.features, db.features)
            np.testing.assert_array_equal(da.labels, db.labels)

    def test_csv_round_trip(self, tmp_path):
        datasets, _ = synthesize_classification_data(1, 12, 5, seed=4)
        path = tmp_path / "agent.csv"
        write_classification_csv(datasets[0], path)
        back = read_classification_csv(path)
        np.testing.assert_array_equal(back.features, datasets[0].features)
        np.testing.assert_array_equal(back.labels, datasets[0].labels)

    def test_empty_csv_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="no data rows"):
            read_classification_csv(path)


class TestQuadraticFamily:
    def test_isotropic_example(self):
        obj = quadratic_objective(2.0 * np.eye(2), np.zeros(2))
        x = np.array([1.0, 0.0])
        assert obj.value(x) == pytest.approx(1.0)
        np.testing.assert_allclose(obj.smoothed_gradient(x, 0.1), [2.0, 0.0])
        # trace(2 I_2) = 4, so the smoothing offset is mu^2 * 2
        assert obj.smoothed_value(x, 0.1) == pytest.approx(1.0 + 0.01 * 2.0)

    def test_linear_family_is_smoothing_fixed_point(self):
        a = np.array([1.5, -2.0, 0.5])
        obj = quadratic_objective(np.zeros((3, 3)), a)
        x = np.array([0.3, 0.1, -0.2])
        assert obj.smoothed_value(x, 0.7) == pytest.approx(obj.value(x))
        np.testing.assert_allclose(obj.smoothed_gradient(x, 0.7), a)

    def test_indefinite_example(self):
        obj = quadratic_objective(np.diag([1.0, -1.0]), np.zeros(2))
        x = np.array([1.0, 1.0])
        assert obj.value(x) == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(obj.smoothed_gradient(x, 0.2), [1.0, -1.0])
        assert obj.smoothed_value(x, 0.2) == pytest.approx(0.0, abs=1e-15)
        assert obj.lower_bound == -math.inf

    def test_rejections(self):
        with pytest.raises(ValueError, match="symmetric"):
            quadratic_objective(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))
        with pytest.raises(ValueError, match="shape"):
            quadratic_objective(np.eye(2), np.zeros(3))

    def test_lipschitz_and_lower_bound_audit(self):
        obj = random_quadratic(3, seed=11)
        sampled = estimate_lipschitz(obj.value_many, obj.box, samples=10**5, seed=13)
        assert sampled <= obj.lipschitz_l0
        rng = np.random.default_rng(14)
        pts = rng.uniform(obj.box.lo, obj.box.hi, size=(10**5, 3))
        assert float(np.min(obj.value_many(pts))) >= obj.lower_bound

    def test_random_family_determinism(self):
        a = random_quadratic(4, seed=3)
        b = random_quadratic(4, seed=3)
        x = np.array([0.2, -1.1, 0.5, 0.0])
        assert a.value(x) == b.value(x)


def test_stacked_assembly_matches_blockwise_sum():
    locals_ = [random_quadratic(2, seed=s) for s in range(5)]
    stacked = StackedObjective(locals_)
    rng = np.random.default_rng(21)
    for x in rng.uniform(-2, 2, size=(100, 10)):
        parts = [locals_[i].value(x[2 * i : 2 * i + 2]) for i in range(5)]
        assert stacked.value(x) == float(np.sum(parts))


def test_stacked_metadata():
    locals_ = [random_quadratic(2, seed=s) for s in range(3)]
    stacked = StackedObjective(locals_)
    assert stacked.num_agents == 3
    assert stacked.total_dim == 6
    assert stacked.lipschitz_l0 == pytest.approx(
        math.sqrt(sum(o.lipschitz_l0**2 for o in locals_))
    )
    assert stacked.has_smoothed_closed_form
    mixed = StackedObjective([toy_objective(), toy_objective(phase=0.3)])
    assert not mixed.has_smoothed_closed_form


def test_box_membership():
    box = Box.cube(2, -1.0, 2.0)
    assert box.contains(np.array([0.0, 1.9]))
    assert not box.contains(np.array([0.0, 2.1]))
    rows = np.array([[0.0, 0.0], [-1.5, 0.0], [1.0, 2.0]])
    np.testing.assert_array_equal(box.contains_rows(rows), [True, False, True])


def test_estimate_lipschitz_recovers_linear_slope():
    a = np.array([3.0, -4.0])

    def value_many(pts):
        return pts @ a

    est = estimate_lipschitz(value_many, Box.cube(2, -1, 1), samples=10**5, seed=2)
    assert est == pytest.approx(5.0, rel=0.05)
    assert est <= 5.0 + 1e-9
