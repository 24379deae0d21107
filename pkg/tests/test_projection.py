import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecnn.errors import ConfigError, NumericError
from ecnn.projection import (
    TrainConfig,
    augment_bias,
    error_vector,
    fit_neuron,
    neuron_forward,
    projection_step,
    rse,
    sigmoid,
)
from ecnn.util import derive_rng


class ZeroInit:
    """Stub generator whose normal() is identically zero."""

    def normal(self, loc, scale, size):
        return np.zeros(size)


def naive_projection_step(w, inputs, errors, chi):
    """Element-by-element reference for the update rule."""
    p, q = inputs.shape
    fro = 0.0
    for i in range(p):
        for t in range(q):
            fro += inputs[i][t] * inputs[i][t]
    out = [float(v) for v in w]
    for i in range(p):
        acc = 0.0
        for t in range(q):
            acc += inputs[i][t] * errors[t]
        out[i] = out[i] - chi * acc / fro
    return np.asarray(out)


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid(0.0) == 0.5

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(-50, 50, 1000)
        np.testing.assert_allclose(sigmoid(a) + sigmoid(-a), 1.0, atol=1e-12)

    def test_known_value(self):
        # oracle: 1/(1 + e^-2) evaluated at high precision
        assert sigmoid(2.0) == pytest.approx(0.8807970779778823, abs=1e-15)

    def test_monotone(self):
        a = np.linspace(-20, 20, 2001)
        assert np.all(np.diff(sigmoid(a)) > 0)

    def test_saturation(self):
        assert sigmoid(1000.0) == 1.0
        assert sigmoid(-1000.0) == 0.0


class TestNeuronForward:
    def test_zero_weights_give_half(self):
        rng = np.random.default_rng(1)
        u = rng.normal(size=5)
        assert neuron_forward(u, np.zeros(5), 0.0) == 0.5

    def test_known_value(self):
        out = neuron_forward(np.array([1.0, 1.0]), np.array([1.0, 1.0]), 0.0)
        assert out == pytest.approx(0.8807970779778823, abs=1e-15)

    def test_scale_invariance(self):
        rng = np.random.default_rng(2)
        u = rng.normal(size=4)
        w = rng.normal(size=4)
        for c in (0.5, 3.0, -2.0):
            assert neuron_forward(u * c, w / c, 0.1) == pytest.approx(
                neuron_forward(u, w, 0.1), abs=1e-12
            )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            neuron_forward(np.ones(3), np.ones(4))


class TestErrorVector:
    def test_zero_weights_half_targets(self):
        u = np.random.default_rng(3).normal(size=(2, 6))
        eta = error_vector(u, np.zeros(2), 0.0, np.full(6, 0.5))
        np.testing.assert_array_equal(eta, np.zeros(6))

    def test_forced_values(self):
        u = np.zeros((2, 2))
        eta = error_vector(u, np.zeros(2), 0.0, np.array([0.0, 1.0]))
        np.testing.assert_allclose(eta, [0.5, -0.5])

    def test_single_column(self):
        eta = error_vector(np.array([[1.0], [1.0]]), np.zeros(2), 0.0, np.array([1.0]))
        np.testing.assert_allclose(eta, [-0.5])


class TestRse:
    def test_zero(self):
        assert rse(np.zeros(3)) == 0.0

    def test_pythagorean(self):
        assert rse(np.array([3.0, 4.0])) == 5.0

    def test_single(self):
        assert rse(np.array([-0.5])) == 0.5


class TestProjectionStep:
    def test_zero_error_fixed_point(self):
        rng = np.random.default_rng(4)
        w = rng.normal(size=3)
        u = rng.normal(size=(3, 7))
        out = projection_step(w, u, np.zeros(7), 1.9)
        np.testing.assert_array_equal(out, w)

    def test_hand_computed_update(self):
        # single example u=(1,1), target 1, w=0, chi=2:
        # eta = sigmoid(0) - 1 = -0.5, ||U||^2 = 2, step = -2/2 * U @ eta = +0.5
        w = np.zeros(2)
        u = np.array([[1.0], [1.0]])
        eta = error_vector(u, w, 0.0, np.array([1.0]))
        w2 = projection_step(w, u, eta, 2.0)
        np.testing.assert_allclose(w2, [0.5, 0.5], atol=1e-15)
        eta2 = error_vector(u, w2, 0.0, np.array([1.0]))
        assert abs(eta2[0]) < abs(eta[0])  # error strictly drops

    def test_linear_in_chi(self):
        rng = np.random.default_rng(5)
        w = rng.normal(size=4)
        u = rng.normal(size=(4, 9))
        eta = rng.normal(size=9)
        step1 = projection_step(w, u, eta, 1.0) - w
        step2 = projection_step(w, u, eta, 2.0) - w
        np.testing.assert_allclose(step2, 2.0 * step1, atol=1e-14)

    def test_zero_matrix_rejected(self):
        with pytest.raises(NumericError):
            projection_step(np.zeros(2), np.zeros((2, 3)), np.ones(3), 1.9)

    @given(st.integers(1, 6), st.integers(1, 10), st.floats(0.1, 2.0), st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_matches_naive_reference(self, p, q, chi, seed):
        rng = np.random.default_rng(seed)
        w = rng.normal(size=p)
        u = rng.normal(size=(p, q))
        eta = rng.normal(size=q)
        np.testing.assert_allclose(
            projection_step(w, u, eta, chi), naive_projection_step(w, u, eta, chi), atol=1e-12
        )


class TestTrainConfig:
    def test_defaults_match_contract(self):
        cfg = TrainConfig()
        assert cfg.chi == 1.9 and cfg.delta == 0.0015
        assert cfg.epsilon is None and cfg.max_steps == 200

    def test_nonpositive_chi_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(chi=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(chi=-1.0)

    def test_chi_outside_band_warns(self):
        with pytest.warns(UserWarning):
            TrainConfig(chi=0.5)
        with pytest.warns(UserWarning):
            TrainConfig(chi=2.5)

    def test_bad_delta_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(delta=0.0)


def _separable(seed, n=8, lo=10.0, hi=11.0):
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=n)
    x = signs * rng.uniform(lo, hi, size=n)
    y = (x > 0).astype(float)
    half = n // 2
    return x[:half][None, :], y[:half], x[half:][None, :], y[half:]


class TestFitNeuron:
    def test_zero_error_stops_immediately(self):
        inputs = np.array([[0.3, -0.4, 1.2]])
        targets = np.full(3, 0.5)
        res = fit_neuron(inputs, targets, inputs, targets, TrainConfig(), ZeroInit())
        assert res.steps_taken == 1
        assert res.criterion == 0.0
        np.testing.assert_array_equal(res.weights, np.zeros(2))

    def test_separable_converges_fast(self):
        xa, ya, xb, yb = _separable(0)
        res = fit_neuron(xa, ya, xb, yb, TrainConfig(seed=0), derive_rng(0, "init"))
        assert res.steps_taken <= 30
        assert res.criterion < res.rse_trace_b[0]

    def test_trace_is_consistent(self):
        xa, ya, xb, yb = _separable(1)
        res = fit_neuron(xa, ya, xb, yb, TrainConfig(seed=1))
        assert res.criterion == res.rse_trace_b[-1]
        assert len(res.rse_trace_b) == res.steps_taken + 1

    def test_criterion_recomputes_from_weights(self):
        xa, ya, xb, yb = _separable(2)
        res = fit_neuron(xa, ya, xb, yb, TrainConfig(seed=2))
        recomputed = rse(error_vector(xb, res.input_weights, res.bias, yb))
        assert res.criterion == pytest.approx(recomputed, abs=1e-12)

    def test_always_terminates(self):
        rng = np.random.default_rng(6)
        for trial in range(100):
            p = int(rng.integers(1, 4))
            n = int(rng.integers(2, 12))
            xa = rng.normal(size=(p, n))
            ya = rng.integers(0, 2, n).astype(float)
            xb = rng.normal(size=(p, n))
            yb = rng.integers(0, 2, n).astype(float)
            cfg = TrainConfig(max_steps=50, seed=trial)
            res = fit_neuron(xa, ya, xb, yb, cfg)
            assert res.steps_taken <= 50

    def test_end_vs_start_decrease_on_realizable_targets(self):
        # benign case: targets generated by a true weight vector, fit and
        # validation on the same part
        rng = np.random.default_rng(7)
        for trial in range(20):
            u = rng.normal(size=(3, 40))
            w_true = rng.normal(size=3)
            targets = 1.0 / (1.0 + np.exp(-(w_true @ u)))
            res = fit_neuron(u, targets, u, targets, TrainConfig(seed=trial))
            assert res.criterion <= res.rse_trace_b[0]

    def test_epsilon_stop(self):
        xa, ya, xb, yb = _separable(3)
        res = fit_neuron(xa, ya, xb, yb, TrainConfig(epsilon=0.5, max_steps=500, seed=3))
        assert res.criterion <= 0.5

    def test_epsilon_zero_runs_to_cap_on_noisy_targets(self):
        rng = np.random.default_rng(8)
        xa = rng.normal(size=(2, 30))
        ya = rng.integers(0, 2, 30).astype(float)
        xb = rng.normal(size=(2, 30))
        yb = rng.integers(0, 2, 30).astype(float)
        res = fit_neuron(xa, ya, xb, yb, TrainConfig(epsilon=0.0, max_steps=40, seed=4))
        assert res.steps_taken == 40

    def test_all_zero_inputs_rejected(self):
        with pytest.raises(NumericError):
            fit_neuron(np.zeros((2, 4)), np.ones(4), np.zeros((2, 4)), np.ones(4), TrainConfig())

    def test_augment_bias_row(self):
        u = np.arange(6.0).reshape(2, 3)
        aug = augment_bias(u)
        assert aug.shape == (3, 3)
        np.testing.assert_array_equal(aug[-1], np.ones(3))
