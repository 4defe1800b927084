"""Training protocol, evaluation, and k-fold cross-validation.

The protocol: train for a fixed number of epochs; after every epoch a
parameter snapshot exists; keep the snapshot whose mean training loss is
smallest (earliest epoch wins ties) and evaluate that one.

Cross-validation is fully deterministic: the fold partition comes from
(n, k, seed), each fold derives its own seed for model init and epoch
shuffles, and fold jobs are independent, so --jobs parallelism cannot
change any result.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import models
from .contour_data import Dataset, FoldSplit, split_kfold
from .engine import make_optimizer, optimizer_step, softmax_cross_entropy
from .errors import DataError, NumericError
from .models import ModelBundle
from .seeding import EPOCH_SHUFFLE, FOLD_SEED, PARAM_INIT, derive_rng, derive_seed

EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 18
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    seed: int = 42
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int          # 1-based
    mean_loss: float
    accuracy: float


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # [true, predicted], 2x2

    def recall(self, label: int) -> float:
        row = self.confusion[label]
        total = row.sum()
        return float(row[label] / total) if total else float("nan")


@dataclass(frozen=True)
class FoldReport:
    fold: int
    test_size: int
    accuracy: float
    selected_epoch: int
    confusion: np.ndarray


@dataclass(frozen=True)
class CvSummary:
    accuracies: tuple
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def summarize(values) -> CvSummary:
    """Five-number summary; quartiles by linear interpolation of order
    statistics (position 1 + (n-1)p)."""
    values = tuple(float(v) for v in values)
    if not values:
        raise ValueError("cannot summarize an empty list")
    q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75])
    return CvSummary(values, min(values), float(q1), float(med), float(q3), max(values))


def select_best_epoch(losses) -> int:
    """1-based index of the smallest loss; ties go to the earliest epoch."""
    losses = list(losses)
    if not losses:
        raise ValueError("no epochs recorded")
    return int(np.argmin(losses)) + 1


def _check_two_classes(labels: np.ndarray) -> None:
    present = np.unique(labels)
    if present.size < 2:
        raise DataError("training set contains a single class")


def train(bundle: ModelBundle, train_set: Dataset,
          cfg: TrainConfig) -> tuple[ModelBundle, list[EpochRecord]]:
    """Train a copy of ``bundle``; return (best snapshot, epoch history).

    Per epoch: seeded shuffle, minibatch forward/backward with the mean
    batch loss as objective, one optimizer step per batch. The reported
    epoch loss is the mean per-sample loss across the epoch.
    """
    x = train_set.matrix()
    y = train_set.labels()
    lengths = train_set.valid_lens()
    _check_two_classes(y)
    n = len(train_set)

    work = bundle.clone()
    params = models.param_list(work)
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate, params)

    history: list[EpochRecord] = []
    best_loss = np.inf
    best_params = None
    best_epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        if cfg.shuffle:
            order = derive_rng(cfg.seed, EPOCH_SHUFFLE, epoch).permutation(n)
        else:
            order = np.arange(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            logits, cache = models.forward_batch(work, x[batch], lengths[batch])
            losses, dlogits, _ = softmax_cross_entropy(logits, y[batch])
            if not np.all(np.isfinite(losses)):
                raise NumericError(f"non-finite loss at epoch {epoch}, "
                                   f"batch {start // cfg.batch_size}")
            loss_sum += float(losses.sum())
            correct += int(np.sum(logits.argmax(axis=1) == y[batch]))
            grads = models.backward_batch(work, cache, dlogits / len(batch))
            optimizer_step(params, grads, opt)
        mean_loss = loss_sum / n
        history.append(EpochRecord(epoch, mean_loss, correct / n))
        if mean_loss < best_loss:
            best_loss = mean_loss
            best_params = [p.copy() for p in params]
            best_epoch = epoch

    for live, snap in zip(params, best_params):
        live[...] = snap
    work.provenance = {
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "selected_epoch": best_epoch,
        "data_digest": train_set.digest(),
        "optimizer": cfg.optimizer,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
    }
    return work, history


def evaluate(bundle: ModelBundle, test_set: Dataset,
             batch_size: int = EVAL_BATCH) -> EvalResult:
    """Accuracy and confusion counts (rows true, columns predicted)."""
    if len(test_set) == 0:
        raise DataError("test set is empty")
    x = test_set.matrix()
    y = test_set.labels()
    lengths = test_set.valid_lens()
    confusion = np.zeros((2, 2), dtype=np.int64)
    for start in range(0, len(test_set), batch_size):
        sl = slice(start, start + batch_size)
        logits, _ = models.forward_batch(bundle, x[sl], lengths[sl])
        pred = logits.argmax(axis=1)
        for true, p in zip(y[sl], pred):
            confusion[true, p] += 1
    accuracy = float(np.trace(confusion) / confusion.sum())
    frozen = confusion.copy()
    frozen.flags.writeable = False
    return EvalResult(accuracy, frozen)


def _build_model(arch: str, arch_cfg, rng) -> ModelBundle:
    if arch == models.ARCH_CONVNET:
        return models.build_convnet(arch_cfg or models.ConvNetConfig(), rng)
    if arch == models.ARCH_LSTM:
        return models.build_lstm(arch_cfg or models.LstmConfig(), rng)
    raise ValueError(f"unknown architecture {arch!r}")


def run_fold(arch: str, arch_cfg, data: Dataset, split: FoldSplit, fold: int,
             cfg: TrainConfig) -> FoldReport:
    """Train a fresh model on all-but-fold and evaluate on the fold."""
    fold_seed = derive_seed(cfg.seed, FOLD_SEED, fold)
    model = _build_model(arch, arch_cfg, derive_rng(fold_seed, PARAM_INIT))
    train_idx = split.train_indices(fold)
    best, history = train(model, data.subset(train_idx), replace(cfg, seed=fold_seed))
    result = evaluate(best, data.subset(split.folds[fold]))
    return FoldReport(fold, int(split.folds[fold].size), result.accuracy,
                      select_best_epoch([r.mean_loss for r in history]),
                      result.confusion)


def _run_fold_args(args) -> FoldReport:
    return run_fold(*args)


def cross_validate(arch: str, arch_cfg, data: Dataset, k: int = 10,
                   cfg: TrainConfig = TrainConfig(),
                   jobs: int = 1) -> tuple[CvSummary, list[FoldReport]]:
    """k-fold CV; returns (five-number summary, per-fold reports).

    ``jobs`` > 1 runs folds in worker processes; results are identical
    to the sequential run.
    """
    split = split_kfold(len(data), k, cfg.seed)
    tasks = [(arch, arch_cfg, data, split, fold, cfg) for fold in range(k)]
    if jobs > 1:
        workers = min(jobs, k, os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_fold_args, tasks))
    else:
        reports = [run_fold(*task) for task in tasks]
    reports.sort(key=lambda r: r.fold)
    summary = summarize([r.accuracy for r in reports])
    return summary, reports


def holdout_split(n: int, seed: int, k: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """A single (k-1)/k train, 1/k test split (fold 0 of the k-fold shuffle)."""
    split = split_kfold(n, k, seed)
    return split.train_indices(0), split.folds[0]
