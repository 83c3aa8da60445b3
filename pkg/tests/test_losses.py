import math

import numpy as np
import pytest

from r3lab.losses import (
    PairedBatch,
    discriminator_step_gradients,
    generator_step_gradients,
    rpgan_discriminator_loss,
    rpgan_generator_loss,
    softplus,
    zero_centered_penalty,
)
from r3lab.nets import Layer, MlpNetwork, forward, init_mlp

LN2 = math.log(2.0)


def scalar_net(w, b=0.0):
    return MlpNetwork((Layer(np.atleast_2d(w), [b], "identity"),))


class TestPairingLosses:
    def test_symmetric_case_is_ln2(self):
        values = np.array([3.0, -1.0, 0.25])
        assert rpgan_discriminator_loss(values, values) == pytest.approx(LN2)
        assert rpgan_generator_loss(values, values) == pytest.approx(LN2)

    def test_large_margin(self):
        # ln(1 + e^-10), hand evaluated
        assert rpgan_discriminator_loss([10.0], [0.0]) == pytest.approx(4.5398899216870535e-05, rel=1e-9)

    def test_generator_example(self):
        # ln(1 + e^2), hand evaluated
        assert rpgan_generator_loss([2.0], [0.0]) == pytest.approx(2.1269280110429727, rel=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(10)
        b = rng.standard_normal(10)
        for c in (-5.0, 0.3, 40.0):
            assert rpgan_discriminator_loss(a + c, b + c) == pytest.approx(
                rpgan_discriminator_loss(a, b), rel=1e-12)

    def test_swap_identity(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal(8)
        b = rng.standard_normal(8)
        assert rpgan_generator_loss(a, b) == pytest.approx(
            rpgan_discriminator_loss(b, a), rel=1e-15)

    def test_positive_floor(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.standard_normal(6) * 10
            b = rng.standard_normal(6) * 10
            assert rpgan_discriminator_loss(a, b) > 0.0
            assert rpgan_generator_loss(a, b) > 0.0

    def test_pairing_error(self):
        with pytest.raises(ValueError):
            rpgan_discriminator_loss([1.0, 2.0], [1.0])

    def test_softplus_overflow_safe(self):
        assert softplus(np.array(1000.0)) == pytest.approx(1000.0)
        assert softplus(np.array(-1000.0)) == 0.0


class TestZeroCenteredPenalty:
    def test_linear_value(self):
        net = scalar_net([[3.0, 4.0]])
        value, _ = zero_centered_penalty(net, np.ones((2, 2)))
        assert value == pytest.approx(25.0)

    def test_zero_weights(self):
        net = scalar_net([[0.0, 0.0]])
        value, grads = zero_centered_penalty(net, np.ones((2, 2)))
        assert value == 0.0
        assert grads.max_abs() == 0.0


def numeric_d_total(d, pair, gamma, param_path, step=1e-6):
    """Central-difference derivative of the full discriminator objective."""
    from r3lab.losses import rpgan_discriminator_loss as d_loss_fn
    from r3lab.nets import input_gradient

    def objective(net):
        scores_real = forward(net, pair.real_samples).ravel()
        scores_fake = forward(net, pair.fake_samples).ravel()
        loss = d_loss_fn(scores_real, scores_fake)
        for batch in (pair.real_samples, pair.fake_samples):
            grads = input_gradient(net, batch)
            loss += 0.5 * gamma * float(np.sum(grads * grads) / batch.shape[0])
        return loss

    layer_idx, is_bias, flat = param_path
    weights = [l.weights.copy() for l in d.layers]
    biases = [l.bias.copy() for l in d.layers]
    target = biases[layer_idx] if is_bias else weights[layer_idx]
    target.flat[flat] += step
    hi = objective(d.with_params(weights, biases))
    target.flat[flat] -= 2 * step
    lo = objective(d.with_params(weights, biases))
    return (hi - lo) / (2 * step)


class TestDiscriminatorStep:
    def test_gamma_zero_matches_plain_pairing(self):
        rng = np.random.default_rng(4)
        d = init_mlp([2, 8, 1], ["leaky_relu_0.2", "identity"], rng)
        batch = rng.standard_normal((6, 2))
        pair = PairedBatch(batch, batch)
        report, grads = discriminator_step_gradients(d, pair, 0.0)
        assert report.d_total == pytest.approx(LN2)
        assert report.d_loss == pytest.approx(LN2)
        assert report.r1 >= 0 and report.r2 >= 0
        # With equal scores the pairing-loss gradient contributions cancel
        # between the identical real and fake rows.
        assert grads.max_abs() == pytest.approx(0.0, abs=1e-15)

    def test_zero_gradient_discriminator_ignores_penalty(self):
        d = scalar_net([[0.0, 0.0]], b=2.0)
        rng = np.random.default_rng(5)
        pair = PairedBatch(rng.standard_normal((4, 2)), rng.standard_normal((4, 2)))
        report_on = discriminator_step_gradients(d, pair, 10.0)[0]
        report_off = discriminator_step_gradients(d, pair, 0.0)[0]
        assert report_on.r1 == 0.0 and report_on.r2 == 0.0
        assert report_on.d_total == pytest.approx(report_off.d_total)

    def test_full_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        d = init_mlp([2, 5, 1], ["tanh", "identity"], rng)
        pair = PairedBatch(rng.standard_normal((4, 2)), rng.standard_normal((4, 2)))
        gamma = 1.7
        _, grads = discriminator_step_gradients(d, pair, gamma)
        for layer_idx in range(len(d.layers)):
            for is_bias in (False, True):
                analytic = (grads.biases if is_bias else grads.weights)[layer_idx]
                for flat in range(analytic.size):
                    numeric = numeric_d_total(d, pair, gamma, (layer_idx, is_bias, flat))
                    assert analytic.ravel()[flat] == pytest.approx(
                        numeric, rel=1e-4, abs=1e-6)

    def test_report_total_consistent(self):
        rng = np.random.default_rng(7)
        d = init_mlp([2, 4, 1], rng=rng)
        pair = PairedBatch(rng.standard_normal((3, 2)), rng.standard_normal((3, 2)))
        report, _ = discriminator_step_gradients(d, pair, 3.0)
        assert report.d_total == pytest.approx(
            report.d_loss + 0.5 * report.gamma * (report.r1 + report.r2))

    def test_negative_gamma_rejected(self):
        d = scalar_net([[1.0, 1.0]])
        pair = PairedBatch(np.ones((2, 2)), np.zeros((2, 2)))
        with pytest.raises(ValueError):
            discriminator_step_gradients(d, pair, -0.1)

    def test_mismatched_pair_rejected(self):
        with pytest.raises(ValueError):
            PairedBatch(np.ones((3, 2)), np.ones((2, 2)))


class TestGeneratorStep:
    def test_constant_discriminator(self):
        rng = np.random.default_rng(8)
        g = init_mlp([3, 4, 2], rng=rng)
        d = scalar_net([[0.0, 0.0]], b=0.0)
        loss, grads = generator_step_gradients(g, d, rng.standard_normal((5, 3)),
                                               rng.standard_normal((5, 2)))
        assert loss == pytest.approx(LN2)
        assert grads.max_abs() == 0.0

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        g = init_mlp([3, 5, 2], ["tanh", "identity"], rng)
        d = init_mlp([2, 4, 1], ["tanh", "identity"], rng)
        noise = rng.standard_normal((4, 3))
        real = rng.standard_normal((4, 2))
        _, grads = generator_step_gradients(g, d, noise, real)
        from r3lab.losses import rpgan_generator_loss as g_loss_fn
        step = 1e-6
        for layer_idx in range(len(g.layers)):
            for is_bias in (False, True):
                analytic = (grads.biases if is_bias else grads.weights)[layer_idx]
                for flat in range(analytic.size):
                    weights = [l.weights.copy() for l in g.layers]
                    biases = [l.bias.copy() for l in g.layers]
                    target = biases[layer_idx] if is_bias else weights[layer_idx]
                    target.flat[flat] += step
                    hi = g_loss_fn(forward(d, real).ravel(),
                                   forward(d, forward(g.with_params(weights, biases), noise)).ravel())
                    target.flat[flat] -= 2 * step
                    lo = g_loss_fn(forward(d, real).ravel(),
                                   forward(d, forward(g.with_params(weights, biases), noise)).ravel())
                    numeric = (hi - lo) / (2 * step)
                    assert analytic.ravel()[flat] == pytest.approx(
                        numeric, rel=1e-4, abs=1e-6)

    def test_invariant_to_final_bias_shift(self):
        rng = np.random.default_rng(10)
        g = init_mlp([3, 4, 2], rng=rng)
        d = init_mlp([2, 4, 1], rng=rng)
        noise = rng.standard_normal((5, 3))
        real = rng.standard_normal((5, 2))
        loss_a, _ = generator_step_gradients(g, d, noise, real)
        shifted_layers = list(d.layers)
        last = shifted_layers[-1]
        shifted_layers[-1] = Layer(last.weights, last.bias + 17.0, last.activation)
        loss_b, _ = generator_step_gradients(g, MlpNetwork(tuple(shifted_layers)), noise, real)
        assert loss_a == pytest.approx(loss_b, rel=1e-12)

    def test_shape_mismatch(self):
        rng = np.random.default_rng(11)
        g = init_mlp([3, 4, 2], rng=rng)
        d = init_mlp([5, 4, 1], rng=rng)
        with pytest.raises(ValueError):
            generator_step_gradients(g, d, rng.standard_normal((4, 3)),
                                     rng.standard_normal((4, 5)))
