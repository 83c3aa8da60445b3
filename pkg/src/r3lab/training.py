"""Adversarial training loop with scheduled hyperparameters.

Alternating single-step updates of discriminator and generator, Adam with a
scheduled second-moment decay, EMA shadowing of the generator with a
scheduled half-life, and schedule-driven augmentation of both real and fake
batches. Progress is counted in images processed, real plus generated, so
each step advances the counter by twice the batch size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .losses import LossReport, PairedBatch, discriminator_step_gradients, generator_step_gradients
from .metrics import mode_coverage, proxy_fd
from .nets import GradientBundle, MlpNetwork, forward, init_mlp, save_network
from .schedules import TrainingSchedule, load_preset, snapshot_at
from .testbeds import (
    RingGmmSpec,
    RingImageSpec,
    export_points_csv,
    render_cell_image,
    sample_ring_gmm,
    write_pgm,
)

__all__ = [
    "OptimizerState",
    "TrainState",
    "AugmentationPolicy",
    "ExperimentConfig",
    "MetricLogRecord",
    "TrainingComplete",
    "DivergenceError",
    "init_optimizer",
    "adam_step",
    "ema_update",
    "apply_augmentation",
    "init_train_state",
    "train_step",
    "run_training",
]

ADAM_EPSILON = 1e-8

TESTBEDS = ("dirac", "ring_gmm", "ring_image")


class TrainingComplete(Exception):
    """Signal that the image budget is exhausted; not a failure."""


class DivergenceError(RuntimeError):
    """A parameter became non-finite during training."""


@dataclass(frozen=True)
class OptimizerState:
    """Adam accumulators; beta1 is fixed, beta2 arrives per step from the schedule."""

    m: GradientBundle
    v: GradientBundle
    step_count: int = 0
    beta1: float = 0.5


def init_optimizer(net: MlpNetwork, beta1: float = 0.5) -> OptimizerState:
    return OptimizerState(GradientBundle.zeros_like(net), GradientBundle.zeros_like(net), 0, beta1)


def adam_step(net: MlpNetwork, grads: GradientBundle, opt: OptimizerState,
              lr: float, beta2: float) -> tuple[MlpNetwork, OptimizerState]:
    """Bias-corrected adaptive-moment update with the scheduled beta2.

    lr = 0 is allowed and leaves parameters untouched (the moments still
    advance), which supports frozen-parameter diagnostics.
    """
    if lr < 0:
        raise ValueError(f"lr must be non-negative, got {lr}")
    if not 0.0 < beta2 < 1.0:
        raise ValueError(f"beta2 must lie in (0, 1), got {beta2}")
    if not grads.matches(net):
        raise ValueError("gradient shapes do not match the network")
    b1 = opt.beta1
    t = opt.step_count + 1
    new_w, new_b = [], []
    m_w, m_b, v_w, v_b = [], [], [], []
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - beta2 ** t
    for layer, gw, gb, mw, mb, vw, vb in zip(
        net.layers, grads.weights, grads.biases,
        opt.m.weights, opt.m.biases, opt.v.weights, opt.v.biases,
    ):
        mw2 = b1 * mw + (1.0 - b1) * gw
        mb2 = b1 * mb + (1.0 - b1) * gb
        vw2 = beta2 * vw + (1.0 - beta2) * gw * gw
        vb2 = beta2 * vb + (1.0 - beta2) * gb * gb
        new_w.append(layer.weights - lr * (mw2 / corr1) / (np.sqrt(vw2 / corr2) + ADAM_EPSILON))
        new_b.append(layer.bias - lr * (mb2 / corr1) / (np.sqrt(vb2 / corr2) + ADAM_EPSILON))
        m_w.append(mw2)
        m_b.append(mb2)
        v_w.append(vw2)
        v_b.append(vb2)
    new_net = net.with_params(new_w, new_b)
    new_opt = OptimizerState(
        GradientBundle(tuple(m_w), tuple(m_b)),
        GradientBundle(tuple(v_w), tuple(v_b)),
        t,
        b1,
    )
    return new_net, new_opt


def ema_update(g: MlpNetwork, g_ema: MlpNetwork, images_this_step: int,
               halflife_kimg: float) -> MlpNetwork:
    """Blend the shadow toward g with beta = 0.5^(images / (halflife * 1000))."""
    if halflife_kimg <= 0:
        raise ValueError(f"halflife_kimg must be positive, got {halflife_kimg}")
    if images_this_step <= 0:
        raise ValueError(f"images_this_step must be positive, got {images_this_step}")
    beta = 0.5 ** (images_this_step / (halflife_kimg * 1000.0))
    new_w = [beta * e.weights + (1.0 - beta) * g_layer.weights
             for e, g_layer in zip(g_ema.layers, g.layers)]
    new_b = [beta * e.bias + (1.0 - beta) * g_layer.bias
             for e, g_layer in zip(g_ema.layers, g.layers)]
    return g_ema.with_params(new_w, new_b)


@dataclass(frozen=True)
class AugmentationPolicy:
    domain: str
    probability: float

    def __post_init__(self):
        if self.domain not in ("points2d", "image16"):
            raise ValueError(f"unknown augmentation domain {self.domain!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {self.probability}")


POINT_JITTER_SIGMA = 0.01
IMAGE_SIDE = 16
MAX_SHIFT = 2


def _translate_image(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.zeros_like(img)
    src_y = slice(max(0, -dy), IMAGE_SIDE - max(0, dy))
    src_x = slice(max(0, -dx), IMAGE_SIDE - max(0, dx))
    dst_y = slice(max(0, dy), IMAGE_SIDE - max(0, -dy))
    dst_x = slice(max(0, dx), IMAGE_SIDE - max(0, -dx))
    out[dst_y, dst_x] = img[src_y, src_x]
    return out


def apply_augmentation(batch: np.ndarray, policy: AugmentationPolicy,
                       rng: np.random.Generator) -> np.ndarray:
    """Independently augment each row with the policy's probability.

    points2d rows are rotated about the origin by a uniform angle and jittered
    isotropically; image16 rows receive one of horizontal flip, vertical flip,
    90-degree rotation, or an integer translation within +/-2 pixels with zero
    fill. Random draws are consumed for every row regardless of the mask so
    the stream stays aligned.
    """
    x = np.asarray(batch, dtype=np.float64)
    n = x.shape[0]
    expected = 2 if policy.domain == "points2d" else IMAGE_SIDE * IMAGE_SIDE
    if x.ndim != 2 or x.shape[1] != expected:
        raise ValueError(
            f"batch width {x.shape} does not match domain {policy.domain!r} (expects {expected})"
        )
    mask = rng.random(n) < policy.probability
    if policy.domain == "points2d":
        angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
        jitter = rng.normal(0.0, POINT_JITTER_SIGMA, size=(n, 2))
        cos, sin = np.cos(angles), np.sin(angles)
        rotated = np.stack([cos * x[:, 0] - sin * x[:, 1],
                            sin * x[:, 0] + cos * x[:, 1]], axis=1) + jitter
        out = np.where(mask[:, None], rotated, x)
        return out
    kinds = rng.integers(0, 4, size=n)
    shifts = rng.integers(-MAX_SHIFT, MAX_SHIFT + 1, size=(n, 2))
    out = x.copy()
    for i in np.flatnonzero(mask):
        img = x[i].reshape(IMAGE_SIDE, IMAGE_SIDE)
        kind = kinds[i]
        if kind == 0:
            img = img[:, ::-1]
        elif kind == 1:
            img = img[::-1, :]
        elif kind == 2:
            img = np.rot90(img)
        else:
            img = _translate_image(img, int(shifts[i, 0]), int(shifts[i, 1]))
        out[i] = img.ravel()
    return out


@dataclass
class ExperimentConfig:
    """One training run: schedule source, testbed, sizes, seed, output paths."""

    preset: str | None = None
    schedule: TrainingSchedule | None = None
    testbed: str = "ring_gmm"
    batch_size: int = 16
    eval_interval: int = 2000
    seed: int = 0
    out_dir: Path | None = None
    noise_dim: int = 8
    g_hidden: tuple[int, ...] = (32, 32)
    d_hidden: tuple[int, ...] = (32, 32)
    g_output_scale: float = 1.0
    eval_samples: int = 512
    dataset_size: int = 360
    gmm: RingGmmSpec = field(default_factory=RingGmmSpec)
    image_spec: RingImageSpec = field(default_factory=RingImageSpec)

    def __post_init__(self):
        if self.testbed not in TESTBEDS:
            raise ValueError(f"unknown testbed {self.testbed!r}; expected one of {TESTBEDS}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be >= 1")

    def resolve_schedule(self) -> TrainingSchedule:
        if self.schedule is not None:
            return self.schedule
        if self.preset is None:
            raise ValueError("config needs either a preset name or an inline schedule")
        return load_preset(self.preset)


@dataclass(frozen=True)
class TrainState:
    g: MlpNetwork
    d: MlpNetwork
    g_ema: MlpNetwork
    opt_g: OptimizerState
    opt_d: OptimizerState
    images_seen: int
    rng: np.random.Generator
    schedule: TrainingSchedule
    domain: str
    noise_dim: int
    batch_size: int


def _domain_for(testbed: str) -> str:
    return "points2d" if testbed == "ring_gmm" else "image16"


def init_train_state(config: ExperimentConfig, data_dim: int) -> TrainState:
    """Seeded fresh networks, optimizers, and the run's random stream."""
    schedule = config.resolve_schedule()
    rng = np.random.default_rng(config.seed)
    g = init_mlp([config.noise_dim, *config.g_hidden, data_dim], rng=rng,
                 output_scale=config.g_output_scale)
    d = init_mlp([data_dim, *config.d_hidden, 1], rng=rng)
    return TrainState(
        g=g,
        d=d,
        g_ema=g,
        opt_g=init_optimizer(g),
        opt_d=init_optimizer(d),
        images_seen=0,
        rng=rng,
        schedule=schedule,
        domain=_domain_for(config.testbed),
        noise_dim=config.noise_dim,
        batch_size=config.batch_size,
    )


def train_step(state: TrainState, real_batch: np.ndarray) -> tuple[TrainState, LossReport]:
    """One alternating update: discriminator first, then generator, then EMA.

    Raises TrainingComplete once another step would push the image counter
    past the budget.
    """
    B = state.batch_size
    total = state.schedule.total_images
    if state.images_seen + 2 * B > total:
        raise TrainingComplete(f"budget of {total} images reached at {state.images_seen}")
    real_batch = np.asarray(real_batch, dtype=np.float64)
    if real_batch.shape[0] != B:
        raise ValueError(f"expected a batch of {B} rows, got {real_batch.shape[0]}")

    snap = snapshot_at(state.schedule, state.images_seen)
    rng = state.rng

    noise = rng.standard_normal((B, state.noise_dim))
    fake = forward(state.g, noise)
    policy = AugmentationPolicy(state.domain, snap.aug_prob)
    real_aug = apply_augmentation(real_batch, policy, rng)
    fake_aug = apply_augmentation(fake, policy, rng)

    report, d_grads = discriminator_step_gradients(
        state.d, PairedBatch(real_aug, fake_aug), snap.gamma
    )
    d_new, opt_d_new = adam_step(state.d, d_grads, state.opt_d, snap.lr, snap.beta2)

    noise2 = rng.standard_normal((B, state.noise_dim))
    g_loss, g_grads = generator_step_gradients(state.g, d_new, noise2, real_aug)
    g_new, opt_g_new = adam_step(state.g, g_grads, state.opt_g, snap.lr, snap.beta2)

    ema_new = ema_update(g_new, state.g_ema, 2 * B, snap.ema_halflife_kimg)
    report = replace(report, g_loss=g_loss)

    new_state = TrainState(
        g=g_new,
        d=d_new,
        g_ema=ema_new,
        opt_g=opt_g_new,
        opt_d=opt_d_new,
        images_seen=state.images_seen + 2 * B,
        rng=rng,
        schedule=state.schedule,
        domain=state.domain,
        noise_dim=state.noise_dim,
        batch_size=state.batch_size,
    )
    return new_state, report


@dataclass(frozen=True)
class MetricLogRecord:
    images_seen: int
    progress: float
    d_loss: float
    g_loss: float
    r1: float
    r2: float
    gamma: float
    lr: float
    beta2: float
    aug_prob: float
    ema_halflife_kimg: float
    proxy_fd: float
    modes_covered: int | None
    hq_fraction: float | None

    def to_json_dict(self) -> dict:
        return {
            "images_seen": self.images_seen,
            "progress": self.progress,
            "d_loss": self.d_loss,
            "g_loss": self.g_loss,
            "r1": self.r1,
            "r2": self.r2,
            "gamma": self.gamma,
            "lr": self.lr,
            "beta2": self.beta2,
            "aug_prob": self.aug_prob,
            "ema_halflife_kimg": self.ema_halflife_kimg,
            "proxy_fd": self.proxy_fd,
            "modes_covered": self.modes_covered,
            "hq_fraction": self.hq_fraction,
        }


def _check_finite(state: TrainState) -> None:
    for net, name in ((state.g, "generator"), (state.d, "discriminator"),
                      (state.g_ema, "generator EMA")):
        for layer in net.layers:
            if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
                raise DivergenceError(f"{name} parameters became non-finite "
                                      f"at {state.images_seen} images")


def run_training(config: ExperimentConfig,
                 data: np.ndarray | None = None) -> tuple[list[MetricLogRecord], TrainState]:
    """Train to the image budget, logging metrics every eval_interval images.

    `data` overrides the testbed sampler with a fixed training matrix (used
    by the rebalancing pipeline). Without it, ring_gmm draws fresh mixture
    samples each batch and ring_image pre-renders a fixed dataset of
    config.dataset_size images mixed over the three classes. The dirac
    testbed has a closed-form simulator of its own and is rejected here.

    When config.out_dir is set, writes metrics.jsonl, final checkpoints
    (g.json, g_ema.json, d.json), and a final sample dump.
    """
    if config.testbed == "dirac":
        raise ValueError(
            "the dirac testbed is simulated in closed form (see the `dirac` command); "
            "run_training trains networks on ring_gmm or ring_image"
        )
    rng_data = np.random.default_rng(np.random.SeedSequence([config.seed, 101]))
    rng_eval = np.random.default_rng(np.random.SeedSequence([config.seed, 202]))

    if data is not None:
        data = np.asarray(data, dtype=np.float64)
        data_dim = data.shape[1]
    elif config.testbed == "ring_gmm":
        data_dim = 2
    else:
        per_class = config.dataset_size // 3
        rows = []
        for cls in range(3):
            for _ in range(per_class):
                rows.append(render_cell_image(cls, rng_data, config.image_spec))
        data = np.array(rows)
        data_dim = data.shape[1]

    state = init_train_state(config, data_dim)
    total = state.schedule.total_images
    B = config.batch_size

    if config.testbed == "ring_gmm" and data is None:
        real_eval = sample_ring_gmm(config.gmm, config.eval_samples, rng_eval)

        def next_batch() -> np.ndarray:
            return sample_ring_gmm(config.gmm, B, rng_data)
    else:
        real_eval = data if data.shape[0] <= 4 * config.eval_samples else \
            data[rng_eval.permutation(data.shape[0])[: 4 * config.eval_samples]]

        def next_batch() -> np.ndarray:
            idx = rng_data.integers(0, data.shape[0], size=B)
            return data[idx]

    records: list[MetricLogRecord] = []
    domain = state.domain

    def evaluate(report: LossReport) -> None:
        _check_finite(state)
        # Scheduled values below are the ones the step that just ran used.
        used = snapshot_at(state.schedule, state.images_seen - 2 * B)
        noise = rng_eval.standard_normal((config.eval_samples, config.noise_dim))
        fakes = forward(state.g_ema, noise)
        fd = proxy_fd(real_eval, fakes, domain)
        if domain == "points2d":
            modes, hq = mode_coverage(fakes, config.gmm)
        else:
            modes, hq = None, None
        records.append(MetricLogRecord(
            images_seen=state.images_seen,
            progress=state.images_seen / total,
            d_loss=report.d_loss,
            g_loss=report.g_loss,
            r1=report.r1,
            r2=report.r2,
            gamma=report.gamma,
            lr=used.lr,
            beta2=used.beta2,
            aug_prob=used.aug_prob,
            ema_halflife_kimg=used.ema_halflife_kimg,
            proxy_fd=fd,
            modes_covered=modes,
            hq_fraction=hq,
        ))

    next_eval = config.eval_interval
    last_report: LossReport | None = None
    while state.images_seen + 2 * B <= total:
        state, last_report = train_step(state, next_batch())
        if state.images_seen >= next_eval:
            evaluate(last_report)
            while next_eval <= state.images_seen:
                next_eval += config.eval_interval
    if last_report is not None and (not records or records[-1].images_seen < state.images_seen):
        evaluate(last_report)

    if config.out_dir is not None:
        _write_artifacts(config, records, state)
    return records, state


def write_metrics_jsonl(path: str | Path, records: list[MetricLogRecord]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict()) + "\n")


def _write_artifacts(config: ExperimentConfig, records: list[MetricLogRecord],
                     state: TrainState) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_jsonl(out / "metrics.jsonl", records)
    save_network(state.g, out / "g.json")
    save_network(state.g_ema, out / "g_ema.json")
    save_network(state.d, out / "d.json")
    dump_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 303]))
    noise = dump_rng.standard_normal((64, config.noise_dim))
    samples = forward(state.g_ema, noise)
    if state.domain == "points2d":
        export_points_csv(out / "samples.csv", samples)
    else:
        grid = samples.reshape(8, 8, IMAGE_SIDE, IMAGE_SIDE)
        tiled = np.clip(grid.transpose(0, 2, 1, 3).reshape(8 * IMAGE_SIDE, 8 * IMAGE_SIDE), 0.0, 1.0)
        write_pgm(out / "samples.pgm", tiled, side=8 * IMAGE_SIDE)
