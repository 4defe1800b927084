"""Matplotlib figures rendered next to the delimited reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .contour_data import F0Contour
from .training import CvSummary, EpochRecord, FoldReport


def plot_cv_accuracy(summary: CvSummary, reports: list[FoldReport], path: Path) -> None:
    fig, (ax_bar, ax_box) = plt.subplots(
        1, 2, figsize=(8, 3.2), gridspec_kw={"width_ratios": [3, 1]})
    folds = [r.fold for r in reports]
    ax_bar.bar(folds, [r.accuracy for r in reports], color="#1f6fb2")
    ax_bar.axhline(summary.median, color="#d95f02", lw=1, ls="--",
                   label=f"median {summary.median:.4f}")
    ax_bar.set_xlabel("fold")
    ax_bar.set_ylabel("test accuracy")
    ax_bar.set_ylim(0.0, 1.0)
    ax_bar.set_xticks(folds)
    ax_bar.legend(loc="lower right", fontsize=8)
    ax_box.boxplot([summary.accuracies], whis=(0, 100))
    ax_box.set_xticklabels(["folds"])
    ax_box.set_ylabel("accuracy")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_history(history: list[EpochRecord], path: Path,
                 selected_epoch: int | None = None) -> None:
    epochs = [r.epoch for r in history]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(epochs, [r.mean_loss for r in history], "o-", color="#1f6fb2",
            label="mean training loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax2 = ax.twinx()
    ax2.plot(epochs, [r.accuracy for r in history], "s-", color="#d95f02",
             label="training accuracy")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0.0, 1.05)
    if selected_epoch is not None:
        ax.axvline(selected_epoch, color="gray", lw=1, ls=":")
    lines1, labels1 = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines1 + lines2, labels1 + labels2, loc="center right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_contours(contours: list[F0Contour], path: Path, ncols: int = 3) -> None:
    """Preview grid of generated contours, one panel per contour."""
    n = len(contours)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(3 * ncols, 2.2 * nrows),
                             squeeze=False)
    for ax, contour in zip(axes.ravel(), contours):
        voiced = contour.f0 > 0
        ax.plot(contour.times[voiced], contour.f0[voiced], ".", ms=2, color="#1f6fb2")
        label = contour.label.token if contour.label is not None else "?"
        ax.set_title(f"{label} ({contour.speaker_id})", fontsize=8)
        ax.set_xlabel("time (s)", fontsize=7)
        ax.set_ylabel("F0 (Hz)", fontsize=7)
        ax.tick_params(labelsize=6)
    for ax in axes.ravel()[n:]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
