"""Relativistic pairing GAN losses with zero-centered gradient penalties.

The discriminator scores paired (real, fake) differences rather than samples
in isolation, and is regularized by the squared norm of its input gradient on
the real batch and on the fake batch, each weighted by gamma/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import (
    GradientBundle,
    MlpNetwork,
    backprop,
    forward,
    param_gradients,
    penalty_param_gradients,
)

__all__ = [
    "PairedBatch",
    "LossReport",
    "softplus",
    "sigmoid",
    "rpgan_discriminator_loss",
    "rpgan_generator_loss",
    "zero_centered_penalty",
    "discriminator_step_gradients",
    "generator_step_gradients",
]


def softplus(t: np.ndarray) -> np.ndarray:
    """ln(1 + e^t), computed as max(t, 0) + log1p(e^-|t|) to avoid overflow."""
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def sigmoid(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class PairedBatch:
    """Row i of real_samples pairs with row i of fake_samples."""

    real_samples: np.ndarray
    fake_samples: np.ndarray

    def __post_init__(self):
        real = np.asarray(self.real_samples, dtype=np.float64)
        fake = np.asarray(self.fake_samples, dtype=np.float64)
        if real.shape != fake.shape:
            raise ValueError(
                f"real and fake batches must pair up row for row, got shapes "
                f"{real.shape} and {fake.shape}"
            )
        if real.ndim != 2 or real.shape[0] == 0:
            raise ValueError(f"paired batch must be non-empty and 2-D, got shape {real.shape}")
        object.__setattr__(self, "real_samples", real)
        object.__setattr__(self, "fake_samples", fake)

    @property
    def rows(self) -> int:
        return self.real_samples.shape[0]


@dataclass(frozen=True)
class LossReport:
    d_loss: float
    g_loss: float
    r1: float
    r2: float
    gamma: float
    d_total: float


def _paired_scores(d_real, d_fake) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(d_real, dtype=np.float64).ravel()
    b = np.asarray(d_fake, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size == 0:
        raise ValueError(
            f"score vectors must pair up and be non-empty, got lengths {a.size} and {b.size}"
        )
    return a, b


def rpgan_discriminator_loss(d_real, d_fake) -> float:
    """Mean softplus(d_fake_i - d_real_i) over pairs."""
    a, b = _paired_scores(d_real, d_fake)
    return float(np.mean(softplus(b - a)))


def rpgan_generator_loss(d_real, d_fake) -> float:
    """Mean softplus(d_real_i - d_fake_i); the discriminator loss with swapped roles."""
    a, b = _paired_scores(d_real, d_fake)
    return float(np.mean(softplus(a - b)))


def zero_centered_penalty(d: MlpNetwork, batch: np.ndarray):
    """Mean squared input-gradient norm of the discriminator on a batch.

    Evaluated on real samples this is the R1 penalty, on generated samples the
    R2 penalty. The gamma/2 weighting is applied by the caller.
    """
    return penalty_param_gradients(d, batch)


def discriminator_step_gradients(d: MlpNetwork, pair: PairedBatch, gamma: float):
    """Loss report and parameter gradients for one discriminator update.

    d_total = mean softplus(d_fake - d_real) + (gamma/2) * (R1 + R2), with R1
    on the real batch and R2 on the fake batch.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    n = pair.rows
    d_real = forward(d, pair.real_samples).ravel()
    d_fake = forward(d, pair.fake_samples).ravel()
    diff = d_fake - d_real
    d_loss = float(np.mean(softplus(diff)))
    g_loss = float(np.mean(softplus(-diff)))

    # d softplus(t)/dt = sigmoid(t); fake rows carry +w, real rows -w.
    w = sigmoid(diff) / n
    grads = param_gradients(d, pair.fake_samples, w) + param_gradients(d, pair.real_samples, -w)

    r1, r1_grads = penalty_param_gradients(d, pair.real_samples)
    r2, r2_grads = penalty_param_gradients(d, pair.fake_samples)
    if gamma != 0.0:
        grads = grads + (r1_grads + r2_grads).scaled(gamma / 2.0)

    report = LossReport(
        d_loss=d_loss,
        g_loss=g_loss,
        r1=r1,
        r2=r2,
        gamma=gamma,
        d_total=d_loss + 0.5 * gamma * (r1 + r2),
    )
    return report, grads


def generator_step_gradients(g: MlpNetwork, d: MlpNetwork, noise: np.ndarray,
                             real_samples: np.ndarray):
    """Generator loss and gradients, backpropagated through a frozen discriminator.

    Loss is mean softplus(D(real_i) - D(G(z_i))) over pairs.
    """
    noise = np.asarray(noise, dtype=np.float64)
    real_samples = np.asarray(real_samples, dtype=np.float64)
    if noise.shape[0] != real_samples.shape[0]:
        raise ValueError(
            f"noise rows ({noise.shape[0]}) must match real rows ({real_samples.shape[0]})"
        )
    if g.output_width != d.input_width:
        raise ValueError(
            f"generator output width {g.output_width} does not feed discriminator "
            f"input width {d.input_width}"
        )
    n = noise.shape[0]
    fake = forward(g, noise)
    d_real = forward(d, real_samples).ravel()
    d_fake = forward(d, fake).ravel()
    diff = d_real - d_fake
    g_loss = float(np.mean(softplus(diff)))

    # d loss / d d_fake_i = -sigmoid(diff_i)/n; push through D to the fakes,
    # then through G. D's own parameters receive nothing.
    upstream_scores = -sigmoid(diff) / n
    _, dloss_dfake = backprop(d, fake, upstream_scores)
    grads = param_gradients(g, noise, dloss_dfake)
    return g_loss, grads
