"""Delimited/structured report writers: CV reports, history logs, filter
exports.

The cross-validation report is JSON with sorted keys so that reruns with
identical inputs produce byte-identical files; per-fold rows are also
emitted as CSV for spreadsheet use.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .models import ARCH_CONVNET, ModelBundle
from .training import CvSummary, EpochRecord, FoldReport


def cv_report_dict(arch: str, arch_cfg, train_cfg, data_provenance: str,
                   data_digest: str, n_samples: int, summary: CvSummary,
                   reports: list[FoldReport], seed: int) -> dict:
    return {
        "kind": "cv_report",
        "arch": arch,
        "arch_config": vars(arch_cfg) if arch_cfg is not None else {},
        "train_config": {
            "epochs": train_cfg.epochs,
            "batch_size": train_cfg.batch_size,
            "optimizer": train_cfg.optimizer,
            "learning_rate": train_cfg.learning_rate,
            "seed": train_cfg.seed,
            "shuffle": train_cfg.shuffle,
        },
        "data": {
            "provenance": data_provenance,
            "digest": data_digest,
            "n_samples": n_samples,
        },
        "seed": seed,
        "folds": [
            {
                "fold": r.fold,
                "test_size": r.test_size,
                "accuracy": r.accuracy,
                "selected_epoch": r.selected_epoch,
                "confusion": np.asarray(r.confusion).tolist(),
            }
            for r in reports
        ],
        "summary": {
            "min": summary.minimum,
            "q1": summary.q1,
            "median": summary.median,
            "q3": summary.q3,
            "max": summary.maximum,
        },
    }


def write_json(record: dict, path: Path) -> None:
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def write_fold_csv(reports: list[FoldReport], path: Path) -> None:
    lines = ["fold,test_size,accuracy,selected_epoch,ss,sq,qs,qq"]
    for r in reports:
        c = np.asarray(r.confusion).ravel()
        lines.append(f"{r.fold},{r.test_size},{r.accuracy:.6f},{r.selected_epoch},"
                     f"{c[0]},{c[1]},{c[2]},{c[3]}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_history_csv(history: list[EpochRecord], path: Path) -> None:
    lines = ["epoch,mean_loss,accuracy"]
    lines += [f"{r.epoch},{r.mean_loss:.6f},{r.accuracy:.4f}" for r in history]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def filter_bank(bundle: ModelBundle) -> np.ndarray:
    """First-layer filters [n_filters, kernel_len] of a ConvNet bundle."""
    if bundle.arch != ARCH_CONVNET:
        raise DataError("model has no convolutional filters")
    return bundle.weights.conv.weights[:, 0, :]


def write_filters_csv(bundle: ModelBundle, path: Path) -> None:
    """One row per filter; %.17g preserves every bit of the weights."""
    rows = [",".join(f"{w:.17g}" for w in filt) for filt in filter_bank(bundle)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_filters_svg(bundle: ModelBundle, path: Path,
                      cell_w: int = 180, cell_h: int = 110) -> None:
    """Small-multiple line plots of the filters, one polyline per filter,
    x axis labelled by tap index."""
    bank = filter_bank(bundle)
    n_filters, kernel_len = bank.shape
    pad, plot_h = 18, cell_h - 40
    width = n_filters * cell_w
    span = float(np.abs(bank).max()) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{cell_h}" '
        f'viewBox="0 0 {width} {cell_h}">',
        f'<rect width="{width}" height="{cell_h}" fill="white"/>',
    ]
    for i, filt in enumerate(bank):
        x0 = i * cell_w + pad
        plot_w = cell_w - 2 * pad
        mid = 14 + plot_h / 2
        xs = x0 + np.arange(kernel_len) / max(kernel_len - 1, 1) * plot_w
        ys = mid - (filt / span) * (plot_h / 2)
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
        parts.append(f'<text x="{x0}" y="11" font-size="10">filter {i}</text>')
        parts.append(f'<line x1="{x0}" y1="{mid:.2f}" x2="{x0 + plot_w}" y2="{mid:.2f}" '
                     'stroke="#cccccc" stroke-width="0.5"/>')
        parts.append(f'<polyline fill="none" stroke="#1f6fb2" stroke-width="1.2" '
                     f'points="{points}"/>')
        for tap in (0, kernel_len - 1):
            tx = x0 + tap / max(kernel_len - 1, 1) * plot_w
            parts.append(f'<text x="{tx:.2f}" y="{cell_h - 6}" font-size="8" '
                         f'text-anchor="middle">{tap}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def parse_filters_csv(text: str) -> np.ndarray:
    rows = [[float(v) for v in line.split(",")]
            for line in text.strip().splitlines()]
    return np.array(rows)
