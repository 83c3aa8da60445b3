"""Evaluation metrics: Fréchet distance, ring mode coverage, classification.

The Fréchet distance runs on Gaussian fits of raw 2-D coordinates or, for
16x16 images, of a fixed pseudo-random 16-dimensional projection. Absolute
values are only meaningful within this codebase; the metric preserves
ordering between generators trained on the same data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .testbeds import RingGmmSpec

__all__ = [
    "GaussianSummary",
    "ClassReport",
    "fit_gaussian",
    "frechet_distance",
    "proxy_fd",
    "mode_coverage",
    "classification_report",
    "COVARIANCE_RIDGE",
    "PROJECTION_SEED",
]

COVARIANCE_RIDGE = 1e-6

# Seed for the fixed 256 -> 16 feature projection used by image-domain runs.
PROJECTION_SEED = 0x52334741

_projection_cache: np.ndarray | None = None


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"mean/covariance shapes are inconsistent: {mean.shape} vs {cov.shape}"
            )
        if np.max(np.abs(cov - cov.T)) > 1e-12 * max(1.0, np.max(np.abs(cov))):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_gaussian(samples: np.ndarray) -> GaussianSummary:
    """Sample mean and unbiased covariance, ridged by 1e-6 * I."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need at least 2 rows to fit moments, got shape {x.shape}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    cov = 0.5 * (cov + cov.T) + COVARIANCE_RIDGE * np.eye(x.shape[1])
    return GaussianSummary(mean, cov)


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root via eigendecomposition, negative eigenvalues clamped."""
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_b^1/2 S_a S_b^1/2)^1/2)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dmean = a.mean - b.mean
    sqrt_b = _sqrt_psd(b.covariance)
    cross = _sqrt_psd(sqrt_b @ a.covariance @ sqrt_b)
    value = float(dmean @ dmean + np.trace(a.covariance + b.covariance - 2.0 * cross))
    return max(value, 0.0)


def _image_projection() -> np.ndarray:
    global _projection_cache
    if _projection_cache is None:
        rng = np.random.default_rng(PROJECTION_SEED)
        _projection_cache = rng.standard_normal((256, 16))
        _projection_cache.setflags(write=False)
    return _projection_cache


def proxy_fd(real_set: np.ndarray, fake_set: np.ndarray, domain: str) -> float:
    """Fréchet distance between Gaussian fits of the two sample sets.

    points2d compares raw coordinates; image16 first projects the 256 pixels
    through a fixed random 16-dimensional feature map.
    """
    real = np.asarray(real_set, dtype=np.float64)
    fake = np.asarray(fake_set, dtype=np.float64)
    if domain == "points2d":
        pass
    elif domain == "image16":
        proj = _image_projection()
        if real.shape[1] != 256 or fake.shape[1] != 256:
            raise ValueError("image16 domain expects 256-column sample matrices")
        real = real @ proj
        fake = fake @ proj
    else:
        raise ValueError(f"unknown domain {domain!r}; expected 'points2d' or 'image16'")
    return frechet_distance(fit_gaussian(real), fit_gaussian(fake))


def mode_coverage(samples: np.ndarray, spec: RingGmmSpec) -> tuple[int, float]:
    """(modes with at least one high-quality sample, high-quality fraction).

    A sample is high quality when it lies within 3 sigma of its nearest mode
    center.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] != 2:
        raise ValueError(f"expected a non-empty (rows, 2) sample matrix, got shape {x.shape}")
    centers = spec.centers()
    dists = np.linalg.norm(x[:, None, :] - centers[None, :, :], axis=2)
    nearest = np.argmin(dists, axis=1)
    high_quality = dists[np.arange(x.shape[0]), nearest] <= 3.0 * spec.sigma
    covered = np.unique(nearest[high_quality])
    return int(covered.size), float(np.mean(high_quality))


@dataclass(frozen=True)
class ClassReport:
    """Per-class precision/recall/F1 plus unweighted macro averages."""

    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float

    @property
    def num_classes(self) -> int:
        return self.precision.size

    def rows(self) -> list[dict]:
        """Table form: one dict per class plus a final macro row."""
        out = [
            {
                "class": str(c),
                "precision": float(self.precision[c]),
                "recall": float(self.recall[c]),
                "f1": float(self.f1[c]),
                "support": int(self.support[c]),
            }
            for c in range(self.num_classes)
        ]
        out.append({
            "class": "macro",
            "precision": self.macro_precision,
            "recall": self.macro_recall,
            "f1": self.macro_f1,
            "support": int(self.support.sum()),
        })
        return out


def classification_report(labels, predictions, num_classes: int) -> ClassReport:
    """Confusion-matrix metrics with zero-denominator conventions.

    Precision of a never-predicted class is 0; recall of an absent class is 0;
    F1 is 0 when precision + recall is 0. Macro values are unweighted means.
    """
    y = np.asarray(labels, dtype=np.int64).ravel()
    p = np.asarray(predictions, dtype=np.int64).ravel()
    if y.shape != p.shape:
        raise ValueError(f"labels and predictions differ in length: {y.size} vs {p.size}")
    if y.size == 0:
        raise ValueError("cannot score an empty prediction set")
    for name, arr in (("labels", y), ("predictions", p)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ValueError(f"{name} outside [0, {num_classes}): {arr.min()}..{arr.max()}")
    confusion = np.bincount(y * num_classes + p, minlength=num_classes * num_classes)
    confusion = confusion.reshape(num_classes, num_classes)
    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)
    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        pr_sum = precision + recall
        f1 = np.where(pr_sum > 0, 2.0 * precision * recall / np.where(pr_sum > 0, pr_sum, 1.0), 0.0)
    return ClassReport(
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
    )
