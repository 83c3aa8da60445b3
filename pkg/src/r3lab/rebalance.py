"""Class-rebalancing pipeline.

Builds the imbalanced three-class cell-image dataset, measures a softmax
classifier on the test split, trains the generator on minority-class
training rows only, synthesizes extra minority samples to balance the
training set, retrains the same classifier, and reports both evaluations
side by side. Validation and test splits never contain synthetic rows and
are byte-identical between the two evaluations.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .metrics import ClassReport, classification_report
from .nets import MlpNetwork, forward
from .schedules import TrainingSchedule
from .testbeds import TRAIN, TEST, LabeledDataset, RingImageSpec, build_imbalanced_dataset
from .training import ExperimentConfig, run_training

__all__ = [
    "ClassifierSettings",
    "LinearClassifier",
    "RebalanceConfig",
    "RebalanceReport",
    "train_classifier",
    "synthesize_minority",
    "run_rebalance_experiment",
    "write_rebalance_report",
]

NUM_CLASSES = 3
MINORITY_CLASS = 1


@dataclass(frozen=True)
class ClassifierSettings:
    # Enough epochs for the convex problem to converge; an under-trained
    # model reacts to class rebalancing with wild over-correction.
    epochs: int = 2500
    lr: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class LinearClassifier:
    """Multinomial logistic regression on flattened pixels."""

    weights: np.ndarray
    bias: np.ndarray

    def logits(self, samples: np.ndarray) -> np.ndarray:
        return samples @ self.weights.T + self.bias

    def predict(self, samples: np.ndarray) -> np.ndarray:
        # Ties resolve to the lowest class id (argmax convention).
        return np.argmax(self.logits(samples), axis=1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def train_classifier(samples: np.ndarray, labels: np.ndarray,
                     settings: ClassifierSettings,
                     num_classes: int = NUM_CLASSES) -> LinearClassifier:
    """Full-batch gradient descent from zero initialization.

    Deterministic for fixed inputs and settings; the optimization is convex,
    so the seed only matters for pipelines that embed this step.
    """
    x = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    present = np.bincount(y, minlength=num_classes)
    if np.any(present == 0):
        missing = [c for c in range(num_classes) if present[c] == 0]
        raise ValueError(f"training data is missing classes {missing}")
    n, dim = x.shape
    w = np.zeros((num_classes, dim))
    b = np.zeros(num_classes)
    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(settings.epochs):
        probs = _softmax(x @ w.T + b)
        delta = (probs - onehot) / n
        w -= settings.lr * (delta.T @ x)
        b -= settings.lr * delta.sum(axis=0)
    return LinearClassifier(w, b)


def synthesize_minority(g_ema: MlpNetwork, count: int, rng: np.random.Generator) -> np.ndarray:
    """Generator outputs clamped to [0, 1] per pixel; shape (count, 256)."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return np.empty((0, g_ema.output_width))
    noise = rng.standard_normal((count, g_ema.input_width))
    return np.clip(forward(g_ema, noise), 0.0, 1.0)


@dataclass
class RebalanceConfig:
    class_counts: tuple[int, int, int] = (441, 166, 455)
    split: tuple[float, float, float] = (0.7, 0.1, 0.2)
    data_seed: int = 0
    gan_preset: str | None = "exp017"
    gan_schedule: TrainingSchedule | None = None
    gan_seed: int = 1
    synth_count: int = 200
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    batch_size: int = 16
    noise_dim: int = 32
    g_hidden: tuple[int, ...] = (64, 64)
    d_hidden: tuple[int, ...] = (64, 32)
    image_spec: RingImageSpec = field(default_factory=RingImageSpec)
    out_dir: Path | None = None

    def echo(self) -> dict:
        d = {
            "class_counts": list(self.class_counts),
            "split": list(self.split),
            "data_seed": self.data_seed,
            "gan_preset": self.gan_preset,
            "gan_schedule": None if self.gan_schedule is None else self.gan_schedule.to_dict(),
            "gan_seed": self.gan_seed,
            "synth_count": self.synth_count,
            "classifier": asdict(self.classifier),
            "batch_size": self.batch_size,
            "noise_dim": self.noise_dim,
            "g_hidden": list(self.g_hidden),
            "d_hidden": list(self.d_hidden),
        }
        return d


@dataclass(frozen=True)
class RebalanceReport:
    before: ClassReport
    after: ClassReport
    train_counts_before: np.ndarray
    train_counts_after: np.ndarray
    config_echo: dict

    def deltas(self) -> dict:
        return {
            "recall": (self.after.recall - self.before.recall).tolist(),
            "precision": (self.after.precision - self.before.precision).tolist(),
            "f1": (self.after.f1 - self.before.f1).tolist(),
            "macro_f1": self.after.macro_f1 - self.before.macro_f1,
            "macro_recall": self.after.macro_recall - self.before.macro_recall,
            "macro_precision": self.after.macro_precision - self.before.macro_precision,
        }


def run_rebalance_experiment(config: RebalanceConfig) -> RebalanceReport:
    dataset = build_imbalanced_dataset(
        config.class_counts, config.split, config.data_seed, config.image_spec
    )
    train_rows = dataset.rows_for(TRAIN)
    test_rows = dataset.rows_for(TEST)
    test_x = dataset.samples[test_rows]
    test_y = dataset.labels[test_rows]

    clf = train_classifier(dataset.samples[train_rows], dataset.labels[train_rows],
                           config.classifier)
    before = classification_report(test_y, clf.predict(test_x), NUM_CLASSES)

    minority_mask = dataset.labels[train_rows] == MINORITY_CLASS
    minority_train = dataset.samples[train_rows][minority_mask]
    gan_config = ExperimentConfig(
        preset=config.gan_preset,
        schedule=config.gan_schedule,
        testbed="ring_image",
        batch_size=config.batch_size,
        seed=config.gan_seed,
        noise_dim=config.noise_dim,
        g_hidden=config.g_hidden,
        d_hidden=config.d_hidden,
        image_spec=config.image_spec,
    )
    _, gan_state = run_training(gan_config, data=minority_train)

    synth_rng = np.random.default_rng(np.random.SeedSequence([config.gan_seed, 404]))
    synth = synthesize_minority(gan_state.g_ema, config.synth_count, synth_rng)
    augmented = dataset.with_extra_training_rows(synth, MINORITY_CLASS, synthetic=True)

    # Split hygiene: synthetic rows may only ever carry the train tag.
    assert not np.any(augmented.synthetic & (augmented.split != TRAIN))
    aug_train = augmented.rows_for(TRAIN)
    counts_before = dataset.class_counts(TRAIN, NUM_CLASSES)
    counts_after = augmented.class_counts(TRAIN, NUM_CLASSES)
    majority = max(counts_after[0], counts_after[2])
    ratio_before = counts_before[MINORITY_CLASS] / max(counts_before[0], counts_before[2])
    ratio_after = counts_after[MINORITY_CLASS] / majority
    if not (ratio_before <= ratio_after <= 1.05):
        raise ValueError(
            f"augmented minority/majority ratio {ratio_after:.3f} outside "
            f"[{ratio_before:.3f}, 1.05]; adjust synth_count"
        )

    clf_after = train_classifier(augmented.samples[aug_train], augmented.labels[aug_train],
                                 config.classifier)
    # Identical evaluation contract: same test rows, same order, both times.
    aug_test = augmented.rows_for(TEST)
    assert np.array_equal(aug_test, test_rows)
    assert augmented.samples[aug_test].tobytes() == test_x.tobytes()
    after = classification_report(test_y, clf_after.predict(augmented.samples[aug_test]),
                                  NUM_CLASSES)

    report = RebalanceReport(
        before=before,
        after=after,
        train_counts_before=counts_before,
        train_counts_after=counts_after,
        config_echo=config.echo(),
    )
    if config.out_dir is not None:
        write_rebalance_report(Path(config.out_dir), report)
    return report


def write_rebalance_report(directory: Path, report: RebalanceReport) -> tuple[Path, Path]:
    """CSV with before/after sections plus a JSON sidecar of config and seeds."""
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / "rebalance_report.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "class", "precision", "recall", "f1", "support"])
        for section, rep in (("before", report.before), ("after", report.after)):
            for row in rep.rows():
                writer.writerow([
                    section, row["class"],
                    repr(row["precision"]), repr(row["recall"]), repr(row["f1"]),
                    row["support"],
                ])
    sidecar_path = directory / "rebalance_report.json"
    payload = {
        "config": report.config_echo,
        "train_counts_before": report.train_counts_before.tolist(),
        "train_counts_after": report.train_counts_after.tolist(),
        "deltas": report.deltas(),
    }
    sidecar_path.write_text(json.dumps(payload, indent=2) + "\n")
    return csv_path, sidecar_path
