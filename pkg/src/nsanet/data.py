"""Synthetic XOR-style data generation and tabular CSV ingestion.

The XOR generator draws rows from a fixed master pool so that, for a given
seed and pool shape, the dataset with n rows and p columns is always the
top-left corner of the same (pool_n, pool_p) matrix: growing n or p extends
the data without changing what was already there. Labels mark whether the
product of the first k coordinates is positive.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CsvFormatError,
    DimensionMismatchError,
    MissingValuesError,
    SingleClassError,
)

POOL_ROWS = 100_000
POOL_COLS = 1024

# Rows per chunk when materializing pool slices, to bound memory.
_CHUNK_VALUES = 1 << 23


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with integer labels in 0..C-1.

    Immutable after construction; safe to share read-only across threads.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    C: int
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def validate(self) -> None:
        if self.X.ndim != 2 or self.n < 1:
            raise DimensionMismatchError("X shape", "(n>=1, p)", self.X.shape)
        if self.y.shape != (self.n,):
            raise DimensionMismatchError("y shape", (self.n,), self.y.shape)
        if not np.all(np.isfinite(self.X)):
            raise DimensionMismatchError("X finiteness", "finite", "non-finite")
        if self.y.min() < 0 or self.y.max() >= self.C:
            raise DimensionMismatchError("label range", f"0..{self.C - 1}", (int(self.y.min()), int(self.y.max())))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")


def xor_labels(X, k: int) -> np.ndarray:
    """1 where the product of the first k coordinates is strictly positive.

    Computed from sign parity rather than the literal product, so large k
    cannot underflow; any zero coordinate forces the label to 0.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if not 1 <= k <= X.shape[1]:
        raise DimensionMismatchError("k", f"1..{X.shape[1]}", k)
    lead = X[:, :k]
    neg_parity = (lead < 0).sum(axis=1) % 2
    any_zero = (lead == 0).any(axis=1)
    return ((neg_parity == 0) & ~any_zero).astype(np.int64)


def _pool_rows(seed: int, n: int, p: int, pool_cols: int) -> np.ndarray:
    """First n rows and p columns of the Philox master pool for this seed.

    Draw d of the stream holds pool entry (d // pool_cols, d % pool_cols),
    mapped to [-1, 1) by 2u-1. One uint64 draw per double, so slices are
    prefix-stable in both n and p.
    """
    out = np.empty((n, p), dtype=np.float64)
    chunk = max(1, _CHUNK_VALUES // pool_cols)
    gen = np.random.Generator(np.random.Philox(key=seed))
    done = 0
    while done < n:
        m = min(chunk, n - done)
        block = gen.random(m * pool_cols).reshape(m, pool_cols)
        out[done:done + m] = block[:, :p]
        done += m
    return 2.0 * out - 1.0


def gen_xor(
    k: int,
    p: int,
    n: int,
    seed: int,
    pool_rows: int = POOL_ROWS,
    pool_cols: int = POOL_COLS,
) -> Dataset:
    """Deterministic k-of-p XOR dataset drawn from the seed's master pool."""
    if not 1 <= k <= p:
        raise DimensionMismatchError("k", f"1..{p}", k)
    if n < 1:
        raise DimensionMismatchError("n", ">=1", n)
    if n > pool_rows or p > pool_cols:
        raise DimensionMismatchError("pool size", (pool_rows, pool_cols), (n, p))
    X = _pool_rows(seed, n, p, pool_cols)
    y = xor_labels(X, k)
    return Dataset(
        X=X,
        y=y,
        feature_names=tuple(f"x{i}" for i in range(p)),
        C=2,
        provenance={
            "kind": "xor",
            "k": k,
            "p": p,
            "n": n,
            "seed": seed,
            "pool_rows": pool_rows,
            "pool_cols": pool_cols,
        },
    )


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    """How to interpret a CSV: which column is the label and how to encode
    categorical features. Unlisted feature columns must be numeric.

    classes, when given, fixes the label-to-integer mapping; otherwise label
    values are numbered in first-appearance order.
    """

    label: str
    onehot: tuple[str, ...] = ()
    ordinal: tuple[str, ...] = ()
    classes: tuple[str, ...] | None = None


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        rows = list(reader)
    if not rows:
        raise CsvFormatError(path, 1, 1, "", "empty file")
    return rows[0], rows[1:]


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Load a labeled table. Missing (empty) cells abort with the offending
    rows; a non-numeric cell in a numeric column aborts with its row/col."""
    path = Path(path)
    header, rows = _read_rows(path)
    if schema.label not in header:
        raise CsvFormatError(path, 1, 1, schema.label, "label column not found")
    col_of = {name: i for i, name in enumerate(header)}
    label_col = col_of[schema.label]
    feature_cols = [i for i, name in enumerate(header) if i != label_col]

    missing = [
        r + 1
        for r, row in enumerate(rows)
        if len(row) != len(header) or any(cell == "" for cell in row)
    ]
    if missing:
        raise MissingValuesError(path, missing)

    # label encoding
    if schema.classes is not None:
        class_of = {name: i for i, name in enumerate(schema.classes)}
    else:
        class_of = {}
        for row in rows:
            class_of.setdefault(row[label_col], len(class_of))
    y = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        lab = row[label_col]
        if lab not in class_of:
            raise CsvFormatError(path, r + 2, label_col + 1, lab, "unknown label")
        y[r] = class_of[lab]

    # feature encoding
    columns: list[np.ndarray] = []
    names: list[str] = []
    for i in feature_cols:
        name = header[i]
        raw = [row[i] for row in rows]
        if name in schema.onehot:
            cats: dict[str, int] = {}
            for v in raw:
                cats.setdefault(v, len(cats))
            block = np.zeros((len(raw), len(cats)))
            for r, v in enumerate(raw):
                block[r, cats[v]] = 1.0
            for cat, j in cats.items():
                columns.append(block[:, j])
                names.append(f"{name}={cat}")
        elif name in schema.ordinal:
            cats = {}
            for v in raw:
                cats.setdefault(v, len(cats))
            columns.append(np.array([float(cats[v]) for v in raw]))
            names.append(name)
        else:
            vals = np.empty(len(raw))
            for r, v in enumerate(raw):
                try:
                    vals[r] = float(v)
                except ValueError:
                    raise CsvFormatError(path, r + 2, i + 1, v, "not a number") from None
            columns.append(vals)
            names.append(name)

    X = np.ascontiguousarray(np.column_stack(columns))
    if not np.all(np.isfinite(X)):
        bad = sorted(set((np.argwhere(~np.isfinite(X))[:, 0] + 1).tolist()))
        raise MissingValuesError(path, bad)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    ds = Dataset(
        X=X,
        y=y,
        feature_names=tuple(names),
        C=len(class_of),
        provenance={"kind": "csv", "path": str(path), "sha256": digest},
    )
    ds.validate()
    return ds


def save_csv(dataset: Dataset, path, label_name: str = "label") -> None:
    """Write features plus an integer label column; floats use repr so a
    reload reproduces X exactly."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(dataset.feature_names) + [label_name])
        for i in range(dataset.n):
            writer.writerow([repr(v) for v in dataset.X[i].tolist()] + [int(dataset.y[i])])


def write_provenance(dataset: Dataset, path) -> None:
    Path(path).write_text(json.dumps(dataset.provenance, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Splits and preprocessing
# ---------------------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded disjoint train/test partition covering the dataset; stratified
    keeps per-class ratios within one sample."""
    n = dataset.n
    if n < 2:
        raise DimensionMismatchError("dataset size for split", ">=2", n)
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        train_idx = []
        for cls in range(dataset.C):
            members = np.flatnonzero(dataset.y == cls)
            if len(members) < 2:
                raise SingleClassError(f"class {cls} has {len(members)} member(s)")
            take = int(np.clip(_round_half_up(spec.train_fraction * len(members)), 1, len(members) - 1))
            train_idx.append(rng.permutation(members)[:take])
        train_mask = np.zeros(n, dtype=bool)
        train_mask[np.concatenate(train_idx)] = True
    else:
        n_train = int(np.clip(_round_half_up(spec.train_fraction * n), 1, n - 1))
        order = rng.permutation(n)
        train_mask = np.zeros(n, dtype=bool)
        train_mask[order[:n_train]] = True

    def part(mask: np.ndarray, name: str) -> Dataset:
        idx = np.flatnonzero(mask)
        return Dataset(
            X=np.ascontiguousarray(dataset.X[idx]),
            y=dataset.y[idx].copy(),
            feature_names=dataset.feature_names,
            C=dataset.C,
            provenance={
                **dataset.provenance,
                "split": {
                    "part": name,
                    "train_fraction": spec.train_fraction,
                    "seed": spec.seed,
                    "stratified": spec.stratified,
                },
            },
        )

    return part(train_mask, "train"), part(~train_mask, "test")


@dataclass(frozen=True)
class StandardizeTransform:
    """Per-feature affine map fit on a training set: z = (x - mean) / scale.

    Zero-variance features get scale 1, so they map to exactly 0 and invert
    back to their constant value.
    """

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.scale + self.mean


def standardize(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, StandardizeTransform]:
    """Center/scale both sets using statistics of the training set only."""
    if train.n < 2:
        raise DimensionMismatchError("train size for standardize", ">=2", train.n)
    mean = train.X.mean(axis=0)
    std = train.X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    tf = StandardizeTransform(mean=mean, scale=scale)

    def apply(ds: Dataset) -> Dataset:
        return Dataset(
            X=np.ascontiguousarray(tf.apply(ds.X)),
            y=ds.y,
            feature_names=ds.feature_names,
            C=ds.C,
            provenance={**ds.provenance, "standardized": True},
        )

    return apply(train), apply(test), tf
