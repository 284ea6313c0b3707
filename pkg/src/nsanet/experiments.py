"""Experiment harness: seeded studies over seeds, widths, sample sizes and
hyperparameter grids, with byte-stable CSV output and a JSON run manifest.

Every study takes explicit seed lists (or a base seed plus counts) and maps
runs to seeds deterministically, so reruns reproduce the CSVs byte for
byte. Wall-clock timings go only into the manifest, never into CSVs.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .anneal import PruneTrace, feature_schedule, node_schedule, run_fsa_nsa, schedule_value
from .data import Dataset, gen_xor
from .errors import NsanetError
from .metrics import EvalReport, evaluate
from .model import MlpModel
from .train import TrainConfig, train_model

# Fixed offset between a study's base seed and the seed of its test pool, so
# train and test XOR data never share rows.
TEST_POOL_SEED_OFFSET = 7_777_777
TEST_POOL_SIZE = 3000


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one seeded training run."""

    seed: int
    loss: float
    train_auc: float | None
    test_auc: float | None
    train_acc: float
    test_acc: float
    node_count: int
    feature_ids: tuple[int, ...]
    wall_time: float

    @classmethod
    def from_eval(cls, seed: int, model: MlpModel, report: EvalReport, wall_time: float) -> "RunRecord":
        return cls(
            seed=seed,
            loss=report.train_loss,
            train_auc=report.train_auc,
            test_auc=report.test_auc,
            train_acc=report.train_acc,
            test_acc=report.test_acc,
            node_count=model.h,
            feature_ids=tuple(int(i) for i in model.feature_ids),
            wall_time=wall_time,
        )


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map preserving item order; results are independent of thread count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def xor_test_set(k: int, p: int, seed: int, n: int = TEST_POOL_SIZE) -> Dataset:
    return gen_xor(k, p, n, seed + TEST_POOL_SEED_OFFSET)


def run_single(
    train_ds: Dataset,
    test_ds: Dataset,
    h: int,
    config: TrainConfig,
    seed: int,
    backend: str | None = None,
) -> RunRecord:
    """Plain training with the given seed; the recorded loss is the mean
    cross-entropy on the full training set after training."""
    t0 = time.perf_counter()
    cfg = TrainConfig(**{**config.to_dict(), "seed": seed})
    model, _, _ = train_model(train_ds, cfg, h, backend=backend)
    report = evaluate(model, train_ds, test_ds)
    return RunRecord.from_eval(seed, model, report, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


def sweep_h(
    train_ds: Dataset,
    test_ds: Dataset,
    h_values: list[int],
    config: TrainConfig,
    seeds: list[int],
    threads: int = 1,
    backend: str | None = None,
) -> list[list]:
    """Best-of-restarts (by training loss) for each hidden-layer width.

    Rows: (h, status, loss, train_auc, test_auc). A width whose every
    restart fails is marked failed and the sweep continues.
    """

    def cell(h: int) -> list:
        records = []
        for seed in seeds:
            try:
                records.append(run_single(train_ds, test_ds, h, config, seed, backend))
            except NsanetError:
                continue
        if not records:
            return [h, "failed", "", "", ""]
        best = min(records, key=lambda r: r.loss)
        return [h, "ok", best.loss, best.train_auc, best.test_auc]

    return parallel_map(cell, list(h_values), threads)


SWEEP_H_HEADER = ("h", "status", "loss", "train_auc", "test_auc")


def restarts_study(
    train_ds: Dataset,
    test_ds: Dataset,
    h: int,
    config: TrainConfig,
    n_restarts: int,
    threads: int = 1,
    backend: str | None = None,
) -> list[RunRecord]:
    """Train n_restarts seeds (base seed + index) and sort by final loss."""
    seeds = [config.seed + i for i in range(n_restarts)]
    records = parallel_map(
        lambda s: run_single(train_ds, test_ds, h, config, s, backend), seeds, threads
    )
    return sorted(records, key=lambda r: r.loss)


def restarts_rows(records: list[RunRecord]) -> list[list]:
    return [
        [rank, r.loss, r.train_auc, r.test_auc]
        for rank, r in enumerate(records, start=1)
    ]


RESTARTS_HEADER = ("rank", "loss", "train_auc", "test_auc")


@dataclass(frozen=True)
class SweepNSeries:
    """One curve of the sample-size study."""

    name: str
    p: int
    h: int
    fsa_nsa: bool = False
    start_nodes: int = 1024
    k_target: int | None = None
    n_iter: int = 300


def sweep_n(
    k: int,
    series: list[SweepNSeries],
    n_values: list[int],
    config: TrainConfig,
    seeds: list[int],
    threads: int = 1,
    backend: str | None = None,
) -> list[list]:
    """Mean loss / test AUC over seeds vs training-set size, per series.

    Training sets are prefixes of each series' master pool, so larger n
    extends smaller n. Rows: (series, n, mean_loss, mean_test_auc).
    """
    rows = []
    for s in series:
        test_ds = xor_test_set(k, s.p, config.seed)

        def one(args):
            n, seed = args
            train_ds = gen_xor(k, s.p, n, config.seed)
            cfg = TrainConfig(**{**config.to_dict(), "seed": seed})
            if s.fsa_nsa:
                model, _ = run_fsa_nsa(
                    train_ds, s.start_nodes, s.h, s.k_target or k, s.n_iter, cfg, backend
                )
            else:
                model, _, _ = train_model(train_ds, cfg, s.h, backend=backend)
            report = evaluate(model, train_ds, test_ds)
            return report.train_loss, report.test_auc

        for n in n_values:
            outs = parallel_map(one, [(n, seed) for seed in seeds], threads)
            losses = [o[0] for o in outs]
            aucs = [o[1] for o in outs]
            rows.append([s.name, n, float(np.mean(losses)), float(np.mean(aucs))])
    return rows


SWEEP_N_HEADER = ("series", "n", "mean_loss", "mean_test_auc")


def schedule_table(
    n_iter: int,
    start_nodes: int,
    end_nodes: int,
    p: int,
    k: int,
    mu: int = 30,
) -> list[list]:
    """Tabulate both schedules: rows (e, h_e, p_e), both non-increasing."""
    ns = node_schedule(start_nodes, end_nodes, n_iter, mu)
    fs = feature_schedule(p, k, n_iter, mu)
    return [[e, schedule_value(ns, e), schedule_value(fs, e)] for e in range(1, n_iter + 1)]


SCHEDULE_HEADER = ("epoch", "h_e", "p_e")


# ---------------------------------------------------------------------------
# Grid search (k-fold cross-validation protocol for real tabular data)
# ---------------------------------------------------------------------------


def kfold_indices(n: int, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Seeded partition into folds with sizes differing by at most one;
    every sample lands in exactly one fold."""
    order = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(order, folds)]


def _subset(ds: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(
        X=np.ascontiguousarray(ds.X[idx]),
        y=ds.y[idx].copy(),
        feature_names=ds.feature_names,
        C=ds.C,
        provenance=ds.provenance,
    )


@dataclass(frozen=True)
class GridCell:
    h: int
    weight_decay: float
    batch_size: int


@dataclass
class GridSearchResult:
    best: GridCell
    cv_rows: list[list]          # (h, weight_decay, batch_size, status, mean_cv_acc)
    final_accs: list[float]      # test accuracy of the retrained models
    final_mean: float
    final_std: float
    weight_count: int            # h * (p + C) of the best cell

    CV_HEADER = ("h", "weight_decay", "batch_size", "status", "mean_cv_acc")


def grid_search(
    train_ds: Dataset,
    test_ds: Dataset,
    config: TrainConfig,
    h_grid: list[int],
    decay_grid: list[float],
    batch_grid: list[int],
    folds: int = 5,
    runs: int = 10,
    threads: int = 1,
    backend: str | None = None,
) -> GridSearchResult:
    """Mean CV accuracy over ``runs`` seeded repetitions of ``folds``-fold
    cross-validation for every grid cell; the argmax cell is retrained
    ``runs`` times on the full training split and scored on the test split.

    Failing cells are recorded and skipped. Ties go to the earlier cell in
    grid order.
    """
    if folds < 2 or train_ds.n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={train_ds.n}")
    cells = [
        GridCell(h, wd, bs)
        for h in h_grid
        for wd in decay_grid
        for bs in batch_grid
    ]

    def cv_accuracy(cell: GridCell) -> list:
        accs = []
        try:
            for run in range(runs):
                fold_rng = np.random.default_rng(
                    np.random.SeedSequence(config.seed, spawn_key=(2, run))
                )
                fold_idx = kfold_indices(train_ds.n, folds, fold_rng)
                for f, val_idx in enumerate(fold_idx):
                    tr_idx = np.sort(np.concatenate([fold_idx[g] for g in range(folds) if g != f]))
                    cfg = TrainConfig(**{
                        **config.to_dict(),
                        "weight_decay": cell.weight_decay,
                        "batch_size": cell.batch_size,
                        "seed": config.seed + run * folds + f,
                    })
                    model, _, _ = train_model(_subset(train_ds, tr_idx), cfg, cell.h, backend=backend)
                    rep = evaluate(model, _subset(train_ds, tr_idx), _subset(train_ds, val_idx))
                    accs.append(rep.test_acc)
        except NsanetError:
            return [cell.h, cell.weight_decay, cell.batch_size, "failed", ""]
        return [cell.h, cell.weight_decay, cell.batch_size, "ok", float(np.mean(accs))]

    cv_rows = parallel_map(cv_accuracy, cells, threads)
    scored = [(row, cell) for row, cell in zip(cv_rows, cells) if row[3] == "ok"]
    if not scored:
        raise NsanetError("every grid cell failed")
    best_row, best = max(scored, key=lambda rc: rc[0][4])

    final_cfgs = [
        TrainConfig(**{
            **config.to_dict(),
            "weight_decay": best.weight_decay,
            "batch_size": best.batch_size,
            "seed": config.seed + 10_000 + i,
        })
        for i in range(runs)
    ]

    def final_acc(cfg: TrainConfig) -> float:
        model, _, _ = train_model(train_ds, cfg, best.h, backend=backend)
        return evaluate(model, train_ds, test_ds).test_acc

    final_accs = parallel_map(final_acc, final_cfgs, threads)
    C = test_ds.C if config.loss == "softmax-ce" else 1
    return GridSearchResult(
        best=best,
        cv_rows=cv_rows,
        final_accs=list(final_accs),
        final_mean=float(np.mean(final_accs)),
        final_std=float(np.std(final_accs)),
        weight_count=weight_count(best.h, train_ds.p, C),
    )


# ---------------------------------------------------------------------------
# Weight counting (biases excluded; they are reported separately)
# ---------------------------------------------------------------------------


def weight_count(h: int, p: int, C: int) -> int:
    """Connection count of a dense one-hidden-layer net: h*(p + C)."""
    return h * (p + C)


def model_weight_count(model: MlpModel) -> int:
    """Surviving connections of a (possibly pruned) model: the W entries
    plus the Beta entries, presented additively as W.size + Beta.size."""
    return model.W.size + model.Beta.size


def equivalent_hidden_count(target_weights: int, p: int, C: int) -> int:
    """Largest width whose dense weight count does not exceed the target
    (at least 1)."""
    return max(1, target_weights // (p + C))


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    """Byte-stable CSV: fixed column order, repr-formatted floats, newline
    line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_trace_csv(path, trace: PruneTrace) -> None:
    write_csv(path, PruneTrace.HEADER, trace.rows())


def config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def write_manifest(path, command: str, payload: dict, seeds, started: float) -> None:
    """Run metadata (not byte-stable: includes wall time and backend)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": payload,
        "config_hash": config_hash(payload),
        "seeds": list(seeds),
        "kernel_backend": kernels.default_name(),
        "wall_time_s": time.perf_counter() - started,
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
