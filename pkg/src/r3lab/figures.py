"""Figure rendering for the CLI report paths.

Each command that writes delimited output can also render a matplotlib
figure next to it. All rendering goes through the Agg backend so the CLI
works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg", force=True)

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_training_curves",
    "save_schedule_curves",
    "save_dirac_figure",
    "save_compare_figure",
    "save_rebalance_figure",
]


def save_training_curves(records: list, path: str | Path) -> Path:
    """Loss, proxy Fréchet distance, scheduled gamma, and mode coverage."""
    path = Path(path)
    images = [r.images_seen for r in records]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    ax = axes[0, 0]
    ax.plot(images, [r.d_loss for r in records], label="d_loss")
    ax.plot(images, [r.g_loss for r in records], label="g_loss")
    ax.set_xlabel("images seen")
    ax.set_ylabel("loss")
    ax.legend()
    ax = axes[0, 1]
    ax.plot(images, [r.proxy_fd for r in records], color="tab:red")
    ax.set_xlabel("images seen")
    ax.set_ylabel("proxy FD")
    ax.set_yscale("log")
    ax = axes[1, 0]
    ax.plot(images, [r.gamma for r in records], label="gamma")
    ax.plot(images, [r.aug_prob for r in records], label="aug_prob")
    ax.set_xlabel("images seen")
    ax.legend()
    ax = axes[1, 1]
    if records and records[0].modes_covered is not None:
        ax.plot(images, [r.modes_covered for r in records], label="modes covered")
        ax.plot(images, [r.hq_fraction for r in records], label="hq fraction")
        ax.legend()
        ax.set_xlabel("images seen")
    else:
        ax.plot(images, [r.r1 for r in records], label="r1")
        ax.plot(images, [r.r2 for r in records], label="r2")
        ax.legend()
        ax.set_xlabel("images seen")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_schedule_curves(rows: list[dict], path: str | Path) -> Path:
    """One panel per scheduled hyperparameter over the progress grid."""
    path = Path(path)
    progress = [r["progress"] for r in rows]
    names = ["lr", "gamma", "beta2", "ema_halflife_kimg", "aug_prob"]
    fig, axes = plt.subplots(1, 5, figsize=(16, 3))
    for ax, name in zip(axes, names):
        ax.plot(progress, [r[name] for r in rows])
        ax.set_title(name)
        ax.set_xlabel("progress")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_dirac_figure(trajectory: np.ndarray, path: str | Path) -> Path:
    """Phase portrait and norm history of the point-mass game."""
    path = Path(path)
    norms = np.hypot(trajectory[:, 0], trajectory[:, 1])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(trajectory[:, 0], trajectory[:, 1], lw=0.8)
    ax1.scatter([trajectory[0, 0]], [trajectory[0, 1]], color="tab:green", label="start")
    ax1.scatter([trajectory[-1, 0]], [trajectory[-1, 1]], color="tab:red", label="end")
    ax1.set_xlabel("theta")
    ax1.set_ylabel("psi")
    ax1.legend()
    ax2.plot(norms)
    ax2.set_xlabel("step")
    ax2.set_ylabel("norm")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_compare_figure(summary_rows: list[dict], path: str | Path) -> Path:
    """Bar chart of median final proxy FD per preset."""
    path = Path(path)
    presets = [r["preset"] for r in summary_rows]
    medians = [r["median_final_proxy_fd"] for r in summary_rows]
    fig, ax = plt.subplots(figsize=(1.2 * len(presets) + 3, 4))
    ax.bar(presets, medians, color="tab:blue")
    ax.set_ylabel("median final proxy FD")
    ax.set_xlabel("preset")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_rebalance_figure(report, path: str | Path) -> Path:
    """Grouped before/after bars for per-class F1 and the macro average."""
    path = Path(path)
    labels = [str(c) for c in range(report.before.num_classes)] + ["macro"]
    before = list(report.before.f1) + [report.before.macro_f1]
    after = list(report.after.f1) + [report.after.macro_f1]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(x - 0.2, before, width=0.4, label="before")
    ax.bar(x + 0.2, after, width=0.4, label="after")
    ax.set_xticks(x, labels)
    ax.set_ylabel("F1")
    ax.set_xlabel("class")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
