import math

import numpy as np
import pytest

from pricedir.dataset import LabeledDataset
from pricedir.errors import TrainingDivergedError, ValidationError
from pricedir.mlp import (
    EvalReport,
    NetworkModel,
    backprop_gradients,
    bce_loss,
    evaluate,
    forward,
    init_network,
    model_from_dict,
    model_to_dict,
    train,
)

from conftest import weekly_dates


def make_ds(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    return LabeledDataset(
        "TST", weekly_dates(len(y)), [f"f{i}" for i in range(X.shape[1])], X, y, {}
    )


def numeric_gradients(model, x, y, h=1e-5):
    """Central finite differences of the loss over every parameter."""
    grads_w = [np.zeros_like(w) for w in model.weights]
    grads_b = [np.zeros_like(b) for b in model.biases]

    def loss():
        out, _ = forward(model, x)
        return bce_loss(y, out)

    for layer, w in enumerate(model.weights):
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + h
            up = loss()
            w[idx] = orig - h
            down = loss()
            w[idx] = orig
            grads_w[layer][idx] = (up - down) / (2 * h)
    for layer, b in enumerate(model.biases):
        for idx in np.ndindex(b.shape):
            orig = b[idx]
            b[idx] = orig + h
            up = loss()
            b[idx] = orig - h
            down = loss()
            b[idx] = orig
            grads_b[layer][idx] = (up - down) / (2 * h)
    return grads_w, grads_b


def relative_error(a, b):
    return abs(a - b) / max(1e-8, abs(a) + abs(b))


class TestInitNetwork:
    def test_deterministic_per_seed(self):
        m1 = init_network([4, 8, 1], seed=11)
        m2 = init_network([4, 8, 1], seed=11)
        for w1, w2 in zip(m1.weights, m2.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(m1.biases, m2.biases):
            assert np.array_equal(b1, b2)

    def test_shapes(self):
        m = init_network([4, 8, 1], seed=0)
        assert m.weights[0].shape == (8, 4)
        assert m.weights[1].shape == (1, 8)
        assert m.biases[0].shape == (8,)
        assert m.biases[1].shape == (1,)

    def test_fan_in_bound(self):
        m = init_network([4, 8, 1], seed=2)
        assert np.all(np.abs(m.weights[0]) <= 0.5)  # 1/sqrt(4)
        assert np.all(np.abs(m.weights[1]) <= 1.0 / math.sqrt(8))
        assert np.all(m.biases[0] == 0.0)

    def test_invalid_sizes(self):
        with pytest.raises(ValidationError):
            init_network([4], seed=0)
        with pytest.raises(ValidationError):
            init_network([4, 0, 1], seed=0)
        with pytest.raises(ValidationError):
            init_network([4, 8, 2], seed=0)


class TestForward:
    def test_zero_network_outputs_half(self):
        m = NetworkModel([3, 2, 1], [np.zeros((2, 3)), np.zeros((1, 2))],
                         [np.zeros(2), np.zeros(1)])
        out, _ = forward(m, [0.3, -1.0, 4.0])
        assert out == pytest.approx(0.5)

    def test_single_unit(self):
        m = NetworkModel([1, 1], [np.array([[1.0]])], [np.zeros(1)])
        out, _ = forward(m, [0.0])
        assert out == pytest.approx(0.5)

    def test_hand_computed_two_layer(self):
        w1 = np.array([[1.0, -1.0], [0.5, 0.25]])
        b1 = np.array([0.1, -0.2])
        w2 = np.array([[2.0, -1.0]])
        b2 = np.array([0.05])
        m = NetworkModel([2, 2, 1], [w1, w2], [b1, b2])
        x = (0.3, 0.7)

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        h1 = sig(1.0 * 0.3 - 1.0 * 0.7 + 0.1)
        h2 = sig(0.5 * 0.3 + 0.25 * 0.7 - 0.2)
        expected = sig(2.0 * h1 - 1.0 * h2 + 0.05)
        out, acts = forward(m, x)
        assert out == pytest.approx(expected, abs=1e-12)
        assert acts[1] == pytest.approx([h1, h2], abs=1e-12)

    def test_output_strictly_inside_unit_interval(self):
        m = init_network([2, 4, 1], seed=3)
        m.weights[1][:] = 500.0  # force saturation
        m.biases[1][:] = 500.0
        out, _ = forward(m, [1.0, 1.0])
        assert 0.0 < out < 1.0

    def test_dimension_and_finite_checks(self):
        m = init_network([2, 2, 1], seed=0)
        with pytest.raises(ValidationError):
            forward(m, [1.0])
        with pytest.raises(ValidationError):
            forward(m, [1.0, np.nan])


class TestBackprop:
    def test_zero_residual_means_zero_gradients(self):
        # all-zero net outputs exactly 0.5; target 0.5 sits at the stationary point
        m = NetworkModel([2, 2, 1], [np.zeros((2, 2)), np.zeros((1, 2))],
                         [np.zeros(2), np.zeros(1)])
        gw, gb = backprop_gradients(m, [0.4, 0.6], 0.5)
        for g in gw + gb:
            assert np.all(g == 0.0)

    def test_output_bias_gradient_ignores_input_when_weights_zero(self):
        m = NetworkModel([2, 2, 1], [np.zeros((2, 2)), np.zeros((1, 2))],
                         [np.zeros(2), np.zeros(1)])
        _, gb1 = backprop_gradients(m, [0.2, 0.1], 1.0)
        _, gb2 = backprop_gradients(m, [0.4, 0.2], 1.0)
        assert gb1[-1] == pytest.approx(gb2[-1])

    @pytest.mark.parametrize("sizes,seed", [([3, 4, 1], 21), ([4, 8, 1], 22)])
    def test_matches_central_finite_differences(self, sizes, seed):
        rng = np.random.default_rng(seed)
        model = init_network(sizes, seed=seed)
        for k in range(20):
            x = rng.random(sizes[0])
            y = float(k % 2)
            gw, gb = backprop_gradients(model, x, y)
            nw, nb = numeric_gradients(model, x, y)
            for a, n in zip(gw, nw):
                for idx in np.ndindex(a.shape):
                    assert relative_error(a[idx], n[idx]) < 1e-5
            for a, n in zip(gb, nb):
                for idx in np.ndindex(a.shape):
                    assert relative_error(a[idx], n[idx]) < 1e-5


class TestTrain:
    def planted_ds(self, n=240, seed=13):
        rng = np.random.default_rng(seed)
        X = rng.random((n, 3))
        eta = 3.0 * X[:, 0] - 3.0 * X[:, 1] + 1.0 * X[:, 2] - 0.5
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(int)
        return make_ds(X, y)

    def test_zero_learning_rate_changes_nothing(self):
        ds = self.planted_ds()
        model = init_network([3, 4, 1], seed=1)
        before = [w.copy() for w in model.weights]
        model, _ = train(model, ds, epochs=3, learning_rate=0.0, batch_size=16, seed=5)
        for w0, w1 in zip(before, model.weights):
            assert np.array_equal(w0, w1)

    def test_full_batch_loss_strictly_decreasing(self):
        ds = self.planted_ds()
        model = init_network([3, 4, 1], seed=2)
        _, losses = train(model, ds, epochs=50, learning_rate=0.05,
                          batch_size=ds.n_rows, seed=3)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_deterministic_history(self):
        ds = self.planted_ds()
        m1 = init_network([3, 4, 1], seed=4)
        m2 = init_network([3, 4, 1], seed=4)
        m1, h1 = train(m1, ds, epochs=5, learning_rate=0.1, batch_size=32, seed=9)
        m2, h2 = train(m2, ds, epochs=5, learning_rate=0.1, batch_size=32, seed=9)
        assert h1 == h2
        for w1, w2 in zip(m1.weights, m2.weights):
            assert np.array_equal(w1, w2)

    def test_learns_linearly_separable_data(self):
        rng = np.random.default_rng(17)
        X = rng.random((200, 2))
        y = (X[:, 0] + X[:, 1] > 1.0).astype(int)
        ds = make_ds(X, y)
        model = init_network([2, 8, 1], seed=17)
        model, _ = train(model, ds, epochs=500, learning_rate=0.5, batch_size=32, seed=18)
        report = evaluate(model, ds, 0.5)
        assert report.accuracy >= 0.95

    def test_divergence_reported_with_epoch(self):
        ds = make_ds([[1.0, 1.0]] * 8, [1] * 8)
        model = init_network([2, 1], seed=0)
        model.weights[0][:] = [np.inf, -np.inf]  # inf - inf -> NaN activations
        with np.errstate(invalid="ignore"):
            with pytest.raises(TrainingDivergedError, match="epoch 1"):
                train(model, ds, epochs=2, learning_rate=0.0, batch_size=4, seed=0)

    def test_hyperparameter_validation(self):
        ds = self.planted_ds(n=10)
        model = init_network([3, 1], seed=0)
        with pytest.raises(ValidationError):
            train(model, ds, epochs=0, learning_rate=0.1, batch_size=4, seed=0)
        with pytest.raises(ValidationError):
            train(model, ds, epochs=1, learning_rate=-0.1, batch_size=4, seed=0)


class TestEvaluate:
    def test_constant_half_with_half_threshold_predicts_all_ones(self):
        m = NetworkModel([1, 1], [np.zeros((1, 1))], [np.zeros(1)])
        y = [1, 0, 1, 1, 0, 0]
        ds = make_ds([[0.1], [0.9], [0.4], [0.3], [0.8], [0.2]], y)
        report = evaluate(m, ds, 0.5)
        assert report.false_neg == 0 and report.true_neg == 0
        assert report.accuracy == pytest.approx(np.mean(y))

    def test_hand_tallied_counts(self):
        # out = sigmoid(4x - 2): x=0 -> .119, x=.25 -> .269, x=.5 -> .5, x=1 -> .881
        m = NetworkModel([1, 1], [np.array([[4.0]])], [np.array([-2.0])])
        X = [[0.0], [1.0], [0.5], [1.0], [0.0], [0.25]]
        y = [1, 1, 0, 1, 0, 0]
        report = evaluate(m, make_ds(X, y), 0.5)
        assert (report.true_pos, report.true_neg) == (2, 2)
        assert (report.false_pos, report.false_neg) == (1, 1)
        assert report.accuracy == pytest.approx(4.0 / 6.0)
        assert report.n_test == 6

    def test_threshold_monotonicity(self):
        model = init_network([3, 5, 1], seed=23)
        rng = np.random.default_rng(23)
        ds = make_ds(rng.random((40, 3)), rng.integers(0, 2, 40))
        previous = None
        for threshold in [0.1, 0.3, 0.5, 0.7, 0.9]:
            report = evaluate(model, ds, threshold)
            predicted_ones = report.true_pos + report.false_pos
            if previous is not None:
                assert predicted_ones <= previous
            previous = predicted_ones

    def test_counts_sum_to_n(self):
        model = init_network([2, 3, 1], seed=5)
        rng = np.random.default_rng(5)
        ds = make_ds(rng.random((25, 2)), rng.integers(0, 2, 25))
        r = evaluate(model, ds, 0.5)
        assert r.true_pos + r.true_neg + r.false_pos + r.false_neg == r.n_test

    def test_threshold_range(self):
        model = init_network([1, 1], seed=0)
        ds = make_ds([[0.5]] * 6, [1, 0, 1, 0, 1, 0])
        with pytest.raises(ValidationError):
            evaluate(model, ds, 1.0)


class TestModelSerialization:
    def test_roundtrip(self):
        model = init_network([3, 4, 1], seed=31)
        doc = model_to_dict(model, metadata={"seed": 31})
        again = model_from_dict(doc)
        assert again.layer_sizes == model.layer_sizes
        for w1, w2 in zip(model.weights, again.weights):
            assert np.array_equal(w1, w2)

    def test_shape_mismatch_rejected(self):
        model = init_network([3, 4, 1], seed=31)
        doc = model_to_dict(model)
        doc["layer_sizes"] = [2, 4, 1]
        with pytest.raises(ValidationError):
            model_from_dict(doc)
