"""Evaluation metrics: ranking AUC, accuracy, and the hit-time statistic."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, SingleClassError
from .model import MlpModel, forward, model_inputs
from .train import TrainConfig, mean_loss, train_model


def auc(scores, labels) -> float:
    """Probability that a positive outranks a negative, ties worth half.

    Rank-based (Mann-Whitney) computation with midranks for ties; averaged
    over all (positive, negative) pairs.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DimensionMismatchError("scores/labels shape", labels.shape, scores.shape)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != len(labels):
        raise DimensionMismatchError("binary labels", "{0,1}", sorted(set(labels.tolist())))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(sorted(set(labels.tolist())))

    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # midrank of the tied block [i, j], 1-based ranks
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[labels == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def accuracy(logits, labels) -> float:
    """Fraction of rows whose predicted class matches the label. A single
    logit column is thresholded at 0, otherwise argmax per row."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim == 1:
        logits = logits[:, None]
    if len(logits) == 0:
        raise DimensionMismatchError("rows", ">=1", 0)
    if logits.shape[1] == 1:
        pred = (logits[:, 0] > 0).astype(np.int64)
    else:
        pred = logits.argmax(axis=1)
    return float((pred == labels).mean())


@dataclass(frozen=True)
class EvalReport:
    train_loss: float
    test_loss: float
    train_acc: float
    test_acc: float
    n_train: int
    n_test: int
    train_auc: float | None = None
    test_auc: float | None = None

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "test_loss": self.test_loss,
            "train_auc": self.train_auc,
            "test_auc": self.test_auc,
            "train_acc": self.train_acc,
            "test_acc": self.test_acc,
            "n_train": self.n_train,
            "n_test": self.n_test,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")


def binary_scores(model: MlpModel, logits: np.ndarray) -> np.ndarray | None:
    """Score usable for binary AUC: the single logit, or the class-1 minus
    class-0 logit margin for a two-class softmax head. None otherwise."""
    if model.C == 1:
        return logits[:, 0]
    if model.C == 2:
        return logits[:, 1] - logits[:, 0]
    return None


def evaluate(model: MlpModel, train_ds, test_ds) -> EvalReport:
    """Losses, accuracies and (for binary data) AUCs on both splits."""
    reports = {}
    for name, ds in (("train", train_ds), ("test", test_ds)):
        X = model_inputs(model, ds.X)
        logits = forward(model, X)
        scores = binary_scores(model, logits) if ds.C == 2 else None
        reports[name] = {
            "loss": mean_loss(model, X, ds.y),
            "acc": accuracy(logits, ds.y),
            "auc": None if scores is None else auc(scores, ds.y),
        }
    return EvalReport(
        train_loss=reports["train"]["loss"],
        test_loss=reports["test"]["loss"],
        train_auc=reports["train"]["auc"],
        test_auc=reports["test"]["auc"],
        train_acc=reports["train"]["acc"],
        test_acc=reports["test"]["acc"],
        n_train=train_ds.n,
        n_test=test_ds.n,
    )


@dataclass(frozen=True)
class HitTimeResult:
    """Restart counts per trial; censored trials hit the budget without
    reaching the threshold and are excluded from the mean."""

    per_trial: tuple[int, ...]
    censored: tuple[bool, ...]
    max_restarts: int

    @property
    def estimable(self) -> bool:
        return not all(self.censored)

    @property
    def mean_restarts(self) -> float | None:
        counts = [c for c, cens in zip(self.per_trial, self.censored) if not cens]
        return float(np.mean(counts)) if counts else None

    def to_dict(self) -> dict:
        return {
            "per_trial": list(self.per_trial),
            "censored": list(self.censored),
            "max_restarts": self.max_restarts,
            "mean_restarts": self.mean_restarts,
            "estimable": self.estimable,
        }


def train_auc_of_run(dataset, h: int, config: TrainConfig, backend=None) -> float:
    model, _, _ = train_model(dataset, config, h, backend=backend)
    X = model_inputs(model, dataset.X)
    logits = forward(model, X)
    return auc(binary_scores(model, logits), dataset.y)


def hit_time(
    dataset,
    h: int,
    config: TrainConfig,
    auc_threshold: float = 0.95,
    max_restarts: int = 20,
    n_trials: int = 10,
    backend: str | None = None,
) -> HitTimeResult:
    """Average number of fresh random initializations needed before a run's
    training AUC reaches the threshold.

    Trial t, restart r trains with seed config.seed + t*max_restarts + r, so
    trials use disjoint, pre-assigned seed blocks and the result does not
    depend on execution order.
    """
    if max_restarts < 1:
        raise DimensionMismatchError("max_restarts", ">=1", max_restarts)
    counts = []
    censored = []
    for trial in range(n_trials):
        used = max_restarts
        was_censored = True
        for restart in range(max_restarts):
            seed = config.seed + trial * max_restarts + restart
            run_cfg = TrainConfig(**{**config.to_dict(), "seed": seed})
            if train_auc_of_run(dataset, h, run_cfg, backend=backend) >= auc_threshold:
                used = restart + 1
                was_censored = False
                break
        counts.append(used)
        censored.append(was_censored)
    return HitTimeResult(
        per_trial=tuple(counts),
        censored=tuple(censored),
        max_restarts=max_restarts,
    )
