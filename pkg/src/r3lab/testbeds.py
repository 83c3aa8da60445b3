"""Verification domains for the training lab.

Three testbeds of increasing size: a one-parameter point-mass adversarial
system with closed-form update fields, a 2-D ring of Gaussians for mode
coverage, and a 16x16 synthetic "cell image" renderer that produces a
class-imbalanced three-class dataset (2, 3, or 4 bright blobs inside a
circular boundary).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DiracState",
    "DiracSummary",
    "dirac_r3_step",
    "dirac_trajectory",
    "simulate_dirac",
    "RingGmmSpec",
    "sample_ring_gmm",
    "RingImageSpec",
    "GenerationError",
    "render_cell_image",
    "LabeledDataset",
    "build_imbalanced_dataset",
    "export_points_csv",
    "write_pgm",
    "export_image_dataset",
    "SPLIT_NAMES",
]

SPLIT_NAMES = ("train", "val", "test")
TRAIN, VAL, TEST = 0, 1, 2


def _logistic(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@dataclass(frozen=True)
class DiracState:
    """Point-mass game: fake distribution at theta, linear critic psi * x.

    The data distribution is the point mass at 0.
    """

    theta: float
    psi: float

    def norm(self) -> float:
        return math.hypot(self.theta, self.psi)


def dirac_r3_step(s: DiracState, lr: float, gamma: float) -> DiracState:
    """One simultaneous explicit update of the regularized point-mass game.

    The critic descends softplus(psi*theta) + gamma*psi^2 (the pairing loss
    plus both zero-centered penalties, each contributing (gamma/2)*psi^2);
    the generator descends softplus(-psi*theta). Both sides use the old state.
    """
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    s_pos = _logistic(s.psi * s.theta)
    s_neg = _logistic(-s.psi * s.theta)
    psi_next = s.psi - lr * (s.theta * s_pos + 2.0 * gamma * s.psi)
    theta_next = s.theta + lr * s.psi * s_neg
    return DiracState(theta=theta_next, psi=psi_next)


def dirac_trajectory(start: DiracState, lr: float, gamma: float, steps: int) -> np.ndarray:
    """(steps + 1, 2) array of (theta, psi) including the start point."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    out = np.empty((steps + 1, 2))
    state = start
    out[0] = (state.theta, state.psi)
    for i in range(1, steps + 1):
        state = dirac_r3_step(state, lr, gamma)
        out[i] = (state.theta, state.psi)
    return out


@dataclass(frozen=True)
class DiracSummary:
    final_norm: float
    min_norm: float
    max_norm: float


def simulate_dirac(start: DiracState, lr: float, gamma: float, steps: int) -> DiracSummary:
    traj = dirac_trajectory(start, lr, gamma, steps)
    norms = np.hypot(traj[:, 0], traj[:, 1])
    return DiracSummary(
        final_norm=float(norms[-1]),
        min_norm=float(norms.min()),
        max_norm=float(norms.max()),
    )


@dataclass(frozen=True)
class RingGmmSpec:
    """k isotropic Gaussians with centers evenly spaced on a circle."""

    k: int = 8
    radius: float = 1.0
    sigma: float = 0.05

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.radius <= 0 or self.sigma <= 0:
            raise ValueError("radius and sigma must be positive")

    def centers(self) -> np.ndarray:
        angles = 2.0 * np.pi * np.arange(self.k) / self.k
        return self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def sample_ring_gmm(spec: RingGmmSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    centers = spec.centers()
    idx = rng.integers(0, spec.k, size=n)
    return centers[idx] + rng.normal(0.0, spec.sigma, size=(n, 2))


class GenerationError(RuntimeError):
    """Raised when blob placement cannot satisfy the separation constraint."""


@dataclass(frozen=True)
class RingImageSpec:
    """Rendering parameters for 16x16 synthetic cell images.

    Class c contains cells_per_class[c] Gaussian blobs inside a circular
    boundary ring. Blob amplitudes vary per blob so that total brightness
    alone does not fully identify the class.
    """

    side: int = 16
    outer_radius: float = 7.0
    cells_per_class: dict = field(default_factory=lambda: {0: 2, 1: 3, 2: 4})
    blob_sigma: float = 1.2
    noise_sigma: float = 0.05
    ring_width: float = 0.6
    ring_intensity: float = 0.5
    amplitude_range: tuple[float, float] = (0.45, 1.0)
    placement_margin: float = 2.5
    max_attempts: int = 1000


def _place_blobs(n_blobs: int, spec: RingImageSpec,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Rejection-sample blob centers; each blob's amplitude is drawn right
    after its position is accepted, so renders of different classes from the
    same seed share their leading blobs exactly."""
    center = (spec.side - 1) / 2.0
    limit = spec.outer_radius - spec.placement_margin
    min_sep = 2.0 * spec.blob_sigma
    placed: list[np.ndarray] = []
    amplitudes: list[float] = []
    attempts = 0
    while len(placed) < n_blobs:
        attempts += 1
        if attempts > spec.max_attempts:
            raise GenerationError(
                f"could not place {n_blobs} blobs with separation {min_sep:.2f} "
                f"inside radius {limit:.2f} after {spec.max_attempts} attempts"
            )
        r = limit * math.sqrt(rng.random())
        ang = 2.0 * math.pi * rng.random()
        cand = np.array([center + r * math.cos(ang), center + r * math.sin(ang)])
        if all(np.linalg.norm(cand - p) >= min_sep for p in placed):
            placed.append(cand)
            amplitudes.append(rng.uniform(*spec.amplitude_range))
    pts = np.array(placed)
    # Separation holds by construction for every accepted pair.
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            assert np.linalg.norm(pts[i] - pts[j]) >= min_sep
    return pts, np.array(amplitudes)


def render_cell_image(class_id: int, rng: np.random.Generator,
                      spec: RingImageSpec | None = None) -> np.ndarray:
    """Flattened 16x16 image in [0, 1]: boundary ring plus class-count blobs."""
    if spec is None:
        spec = RingImageSpec()
    if class_id not in spec.cells_per_class:
        raise ValueError(f"class_id must be one of {sorted(spec.cells_per_class)}, got {class_id}")
    n_blobs = spec.cells_per_class[class_id]
    positions, amplitudes = _place_blobs(n_blobs, spec, rng)

    center = (spec.side - 1) / 2.0
    yy, xx = np.mgrid[0:spec.side, 0:spec.side].astype(np.float64)
    dist = np.hypot(xx - center, yy - center)
    img = spec.ring_intensity * np.exp(-((dist - spec.outer_radius) ** 2) / (2.0 * spec.ring_width ** 2))
    for pos, amp in zip(positions, amplitudes):
        sq = (xx - pos[0]) ** 2 + (yy - pos[1]) ** 2
        img += amp * np.exp(-sq / (2.0 * spec.blob_sigma ** 2))
    if spec.noise_sigma > 0:
        img += rng.normal(0.0, spec.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0).ravel()


@dataclass(frozen=True)
class LabeledDataset:
    """Row-aligned samples, integer labels, split tags, and synthetic flags."""

    samples: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    synthetic: np.ndarray

    def __post_init__(self):
        n = self.samples.shape[0]
        for name, arr in (("labels", self.labels), ("split", self.split),
                          ("synthetic", self.synthetic)):
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per sample row")

    def rows_for(self, split_id: int) -> np.ndarray:
        return np.flatnonzero(self.split == split_id)

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            self.samples[indices],
            self.labels[indices],
            self.split[indices],
            self.synthetic[indices],
        )

    def with_extra_training_rows(self, samples: np.ndarray, label: int,
                                 synthetic: bool = True) -> "LabeledDataset":
        """Append rows tagged as training data (and, by default, synthetic)."""
        extra = samples.shape[0]
        return LabeledDataset(
            np.vstack([self.samples, samples]),
            np.concatenate([self.labels, np.full(extra, label, dtype=np.int64)]),
            np.concatenate([self.split, np.full(extra, TRAIN, dtype=np.int64)]),
            np.concatenate([self.synthetic, np.full(extra, synthetic, dtype=bool)]),
        )

    def class_counts(self, split_id: int, num_classes: int) -> np.ndarray:
        rows = self.rows_for(split_id)
        return np.bincount(self.labels[rows], minlength=num_classes)


def _allocate_split(n: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Largest-remainder allocation; ties go to the earlier split."""
    raw = [f * n for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    remainder = n - sum(counts)
    order = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in range(remainder):
        counts[order[i]] += 1
    return tuple(counts)


def build_imbalanced_dataset(counts, split=(0.7, 0.1, 0.2), seed: int = 0,
                             spec: RingImageSpec | None = None) -> LabeledDataset:
    """Render per-class image counts and split each class by the fractions.

    Validation and test rows only ever contain rendered images; synthetic
    rows enter later through with_extra_training_rows.
    """
    if spec is None:
        spec = RingImageSpec()
    counts = tuple(int(c) for c in counts)
    if any(c <= 0 for c in counts):
        raise ValueError(f"all class counts must be positive, got {counts}")
    split = tuple(float(f) for f in split)
    if len(split) != 3 or any(f < 0 for f in split) or abs(sum(split) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be three non-negatives summing to 1, got {split}")

    rng = np.random.default_rng(seed)
    dim = spec.side * spec.side
    total = sum(counts)
    samples = np.empty((total, dim))
    labels = np.empty(total, dtype=np.int64)
    split_tags = np.empty(total, dtype=np.int64)
    row = 0
    for cls, count in enumerate(counts):
        block = slice(row, row + count)
        for i in range(count):
            samples[row + i] = render_cell_image(cls, rng, spec)
        labels[block] = cls
        n_tr, n_val, _ = _allocate_split(count, split)
        perm = rng.permutation(count)
        tags = np.empty(count, dtype=np.int64)
        tags[perm[:n_tr]] = TRAIN
        tags[perm[n_tr:n_tr + n_val]] = VAL
        tags[perm[n_tr + n_val:]] = TEST
        split_tags[block] = tags
        row += count
    return LabeledDataset(samples, labels, split_tags, np.zeros(total, dtype=bool))


def export_points_csv(path: str | Path, samples: np.ndarray,
                      labels: np.ndarray | None = None) -> None:
    """2-D points as CSV with columns x,y[,label]."""
    samples = np.asarray(samples, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if labels is None:
            writer.writerow(["x", "y"])
            for x, y in samples:
                writer.writerow([repr(float(x)), repr(float(y))])
        else:
            writer.writerow(["x", "y", "label"])
            for (x, y), lab in zip(samples, np.asarray(labels)):
                writer.writerow([repr(float(x)), repr(float(y)), int(lab)])


def write_pgm(path: str | Path, image: np.ndarray, side: int = 16) -> None:
    """Binary PGM (P5, maxval 255) from a flattened or square intensity array."""
    img = np.asarray(image, dtype=np.float64).reshape(-1)
    height = img.size // side
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{side} {height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def export_image_dataset(directory: str | Path, dataset: LabeledDataset,
                         side: int = 16) -> Path:
    """One PGM per row plus an index CSV with columns filename,label,split."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index_path = directory / "index.csv"
    with open(index_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "label", "split"])
        for i in range(dataset.samples.shape[0]):
            name = f"img_{i:05d}.pgm"
            write_pgm(directory / name, dataset.samples[i], side=side)
            writer.writerow([name, int(dataset.labels[i]), SPLIT_NAMES[dataset.split[i]]])
    return index_path
