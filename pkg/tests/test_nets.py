import numpy as np
import pytest

from r3lab.nets import (
    GradientBundle,
    Layer,
    MlpNetwork,
    finite_difference_check,
    forward,
    init_mlp,
    input_gradient,
    load_network,
    param_gradients,
    penalty_param_gradients,
    save_network,
)


def linear_net(w, b):
    return MlpNetwork((Layer(np.atleast_2d(w), np.atleast_1d(b), "identity"),))


def random_net(rng, max_layers=3, max_width=16, in_width=None, out_width=1):
    n_layers = int(rng.integers(1, max_layers + 1))
    widths = [in_width or int(rng.integers(1, max_width + 1))]
    for _ in range(n_layers - 1):
        widths.append(int(rng.integers(1, max_width + 1)))
    widths.append(out_width)
    acts = [str(rng.choice(["leaky_relu_0.2", "tanh", "identity"]))
            for _ in range(n_layers - 1)] + ["identity"]
    return init_mlp(widths, acts, rng)


class TestForward:
    def test_identity_layer(self):
        net = linear_net(np.eye(2), np.zeros(2))
        out = forward(net, np.array([[1.0, 2.0]]))
        assert np.array_equal(out, [[1.0, 2.0]])

    def test_affine_map(self):
        net = linear_net([[3.0, 4.0]], [1.0])
        assert forward(net, np.array([[1.0, 1.0]]))[0, 0] == 8.0

    def test_leaky_relu_slope(self):
        net = MlpNetwork((Layer([[1.0]], [0.0], "leaky_relu_0.2"),))
        assert forward(net, np.array([[-1.0]]))[0, 0] == pytest.approx(-0.2)

    def test_shape_mismatch(self):
        net = linear_net([[3.0, 4.0]], [1.0])
        with pytest.raises(ValueError):
            forward(net, np.ones((2, 3)))

    def test_deterministic_bitwise(self):
        rng = np.random.default_rng(7)
        net = random_net(rng, in_width=5)
        batch = rng.standard_normal((6, 5))
        a = forward(net, batch)
        b = forward(net, batch)
        assert a.tobytes() == b.tobytes()


class TestParamGradients:
    def test_linear_case(self):
        net = linear_net([[0.0, 0.0]], [0.0])
        bundle = param_gradients(net, np.array([[1.0, 2.0]]), np.array([1.0]))
        assert np.array_equal(bundle.weights[0], [[1.0, 2.0]])
        assert np.array_equal(bundle.biases[0], [1.0])

    def test_zero_upstream(self):
        rng = np.random.default_rng(3)
        net = random_net(rng, in_width=4)
        batch = rng.standard_normal((5, 4))
        bundle = param_gradients(net, batch, np.zeros(5))
        assert bundle.max_abs() == 0.0

    def test_upstream_additivity(self):
        rng = np.random.default_rng(11)
        net = random_net(rng, in_width=3)
        batch = rng.standard_normal((4, 3))
        u1 = rng.standard_normal(4)
        u2 = rng.standard_normal(4)
        combined = param_gradients(net, batch, u1 + u2)
        separate = param_gradients(net, batch, u1) + param_gradients(net, batch, u2)
        for a, b in zip(combined.weights, separate.weights):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        net = init_mlp([3, 8, 1], ["tanh", "identity"], rng)
        batch = rng.standard_normal((5, 3))
        report = finite_difference_check(net, batch, 1e-5)
        assert report.param_error < 1e-4


class TestInputGradient:
    def test_linear_rows_equal_weights(self):
        net = linear_net([[3.0, 4.0]], [1.0])
        grads = input_gradient(net, np.array([[0.5, 0.5], [2.0, -1.0]]))
        np.testing.assert_array_equal(grads, [[3.0, 4.0], [3.0, 4.0]])

    def test_constant_network(self):
        net = linear_net([[0.0, 0.0]], [5.0])
        grads = input_gradient(net, np.ones((3, 2)))
        assert np.all(grads == 0.0)

    def test_multi_output_rejected(self):
        net = linear_net(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            input_gradient(net, np.ones((1, 2)))

    def test_tanh_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        net = init_mlp([2, 6, 1], ["tanh", "identity"], rng)
        batch = rng.standard_normal((4, 2))
        report = finite_difference_check(net, batch, 1e-5)
        assert report.input_error < 1e-4


class TestPenalty:
    def test_linear_closed_form(self):
        net = linear_net([[3.0, 4.0]], [1.0])
        value, grads = penalty_param_gradients(net, np.array([[1.0, 2.0], [0.0, 0.0]]))
        assert value == pytest.approx(25.0)
        np.testing.assert_allclose(grads.weights[0], [[6.0, 8.0]])
        np.testing.assert_allclose(grads.biases[0], [0.0])

    def test_zero_network(self):
        net = linear_net([[0.0, 0.0]], [0.0])
        value, grads = penalty_param_gradients(net, np.ones((3, 2)))
        assert value == 0.0
        assert grads.max_abs() == 0.0

    def test_empty_batch_rejected(self):
        net = linear_net([[1.0, 1.0]], [0.0])
        with pytest.raises(ValueError):
            penalty_param_gradients(net, np.empty((0, 2)))

    def test_nonnegative_and_zero_iff_zero_gradient(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            net = random_net(rng, in_width=3)
            batch = rng.standard_normal((4, 3))
            value, _ = penalty_param_gradients(net, batch)
            grads = input_gradient(net, batch)
            assert value >= 0.0
            if np.all(grads == 0.0):
                assert value == 0.0
            else:
                assert value > 0.0

    def test_double_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            net = random_net(rng, in_width=int(rng.integers(1, 6)))
            batch = rng.standard_normal((4, net.input_width))
            report = finite_difference_check(net, batch, 1e-5)
            assert report.penalty_error < 1e-4, report


class TestFiniteDifferenceCheck:
    def test_linear_net_is_exact(self):
        net = linear_net([[1.5, -2.0]], [0.3])
        report = finite_difference_check(net, np.array([[1.0, 2.0], [3.0, -1.0]]), 1e-5)
        assert report.max_error() < 1e-9

    def test_step_must_be_positive(self):
        net = linear_net([[1.0, 1.0]], [0.0])
        with pytest.raises(ValueError):
            finite_difference_check(net, np.ones((1, 2)), 0.0)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        net = init_mlp([4, 7, 3], rng=rng)
        path = tmp_path / "net.json"
        save_network(net, path)
        again = load_network(path)
        assert len(again.layers) == len(net.layers)
        for a, b in zip(again.layers, net.layers):
            assert a.activation == b.activation
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.bias, b.bias)

    def test_bad_chaining_rejected(self):
        with pytest.raises(ValueError):
            MlpNetwork((
                Layer(np.ones((3, 2)), np.zeros(3), "identity"),
                Layer(np.ones((1, 4)), np.zeros(1), "identity"),
            ))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Layer([[np.nan]], [0.0], "identity")


class TestBundleArithmetic:
    def test_zeros_and_add(self):
        rng = np.random.default_rng(13)
        net = random_net(rng, in_width=3)
        zero = GradientBundle.zeros_like(net)
        assert zero.matches(net)
        batch = rng.standard_normal((2, 3))
        bundle = param_gradients(net, batch, np.ones(2))
        summed = bundle + zero
        for a, b in zip(summed.weights, bundle.weights):
            np.testing.assert_array_equal(a, b)
        half = bundle.scaled(0.5)
        for a, b in zip(half.weights, bundle.weights):
            np.testing.assert_allclose(a, 0.5 * b)
