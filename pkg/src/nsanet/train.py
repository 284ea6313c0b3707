"""Loss, analytic gradients, Adam with weight decay, and the epoch loop.

Reproducibility contract: each run is driven by one 64-bit seed. Stream i of
a seed is numpy's PCG64 seeded with ``SeedSequence(seed, spawn_key=(i,))``;
stream 0 initializes parameters and stream 1 drives epoch shuffling, so
restarts differ only by seed. Given (seed, config, data), the trajectory is
bit-exactly reproducible on a fixed kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatchError,
    NonFiniteLossError,
    StaleAdamStateError,
)
from .model import MlpModel, model_inputs

STREAM_INIT = 0
STREAM_SHUFFLE = 1

LOSS_KINDS = ("binary-logistic", "softmax-ce")
DECAY_MODES = ("coupled", "decoupled")


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    """Independent, reproducible generator for one stream of a run seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


@dataclass(frozen=True)
class AdamHyper:
    """Adam constants. Weight decay defaults to the coupled convention
    (lambda*theta added to the gradient before the moment updates, the
    classic framework behavior); "decoupled" applies it directly to the
    parameters instead, for comparison runs."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    decay_mode: str = "coupled"


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the Adam-with-decay protocol
    used throughout the experiments (lr 0.001, weight decay 0.0001)."""

    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 64
    epochs: int = 200
    seed: int = 0
    loss: str = "binary-logistic"
    decay_mode: str = "coupled"

    FIELDS = ("lr", "weight_decay", "batch_size", "epochs", "seed", "loss", "decay_mode")

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.decay_mode not in DECAY_MODES:
            raise ValueError(f"decay_mode must be one of {DECAY_MODES}, got {self.decay_mode!r}")

    @property
    def hyper(self) -> AdamHyper:
        return AdamHyper(lr=self.lr, weight_decay=self.weight_decay, decay_mode=self.decay_mode)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{k: d[k] for k in cls.FIELDS if k in d})


@dataclass
class Grads:
    """Gradient (or moment) tensors shaped like the model parameters."""

    W: np.ndarray
    b: np.ndarray
    Beta: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros_like(cls, model: MlpModel) -> "Grads":
        return cls(
            W=np.zeros_like(model.W),
            b=np.zeros_like(model.b),
            Beta=np.zeros_like(model.Beta),
            c=np.zeros_like(model.c),
        )


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared timestep.

    Shapes track the model; rebuild with init_adam_state after any pruning
    step changes shapes.
    """

    m: Grads
    v: Grads
    t: int = 0
    hyper: AdamHyper = field(default_factory=AdamHyper)


def init_adam_state(model: MlpModel, hyper: AdamHyper | None = None) -> AdamState:
    return AdamState(
        m=Grads.zeros_like(model),
        v=Grads.zeros_like(model),
        t=0,
        hyper=hyper or AdamHyper(),
    )


def init_model(p: int, h: int, C: int, rng: np.random.Generator) -> MlpModel:
    """Random model: W, b ~ U(-1/sqrt(p), 1/sqrt(p)), Beta ~ U(-1/sqrt(h),
    1/sqrt(h)), c = 0. Fully determined by the generator state."""
    if min(p, h, C) < 1:
        raise DimensionMismatchError("init sizes p,h,C", ">=1", (p, h, C))
    aw = 1.0 / np.sqrt(p)
    ab = 1.0 / np.sqrt(h)
    return MlpModel(
        W=rng.uniform(-aw, aw, size=(h, p)),
        b=rng.uniform(-aw, aw, size=h),
        Beta=rng.uniform(-ab, ab, size=(h, C)),
        c=np.zeros(C),
        feature_ids=np.arange(p, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------


def _binary_loss_dlogits(logits, y):
    # Stable logistic loss: softplus(z) - y*z with softplus(z) = max(z,0) + log1p(exp(-|z|))
    z = logits[:, 0]
    losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    sig = np.empty_like(z)
    pos = z >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    sig[~pos] = ez / (1.0 + ez)
    dlogits = (sig - y)[:, None]
    return losses, dlogits


def _softmax_loss_dlogits(logits, y):
    zmax = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - zmax)
    s = e.sum(axis=1, keepdims=True)
    losses = np.log(s[:, 0]) - (logits[np.arange(len(y)), y] - zmax[:, 0])
    probs = e / s
    probs[np.arange(len(y)), y] -= 1.0
    return losses, probs


def loss_and_grad(model: MlpModel, X, y) -> tuple[float, Grads]:
    """Mean cross-entropy over the batch and its exact analytic gradients.

    Binary (C=1) uses the single-logit logistic loss with labels in {0,1};
    C>=2 uses softmax cross-entropy with labels in 0..C-1. Weight decay is
    not part of the loss value; the optimizer applies it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[1] != model.p:
        raise DimensionMismatchError("batch feature count", model.p, X.shape)
    if len(X) == 0:
        raise DimensionMismatchError("batch size", ">=1", 0)
    n_classes = 2 if model.C == 1 else model.C
    if y.min() < 0 or y.max() >= n_classes:
        raise DimensionMismatchError("label range", f"0..{n_classes - 1}", (int(y.min()), int(y.max())))

    B = len(X)
    Z = X @ model.W.T + model.b
    A = np.maximum(Z, 0.0)
    logits = A @ model.Beta + model.c

    if model.C == 1:
        losses, dlogits = _binary_loss_dlogits(logits, y.astype(np.float64))
    else:
        losses, dlogits = _softmax_loss_dlogits(logits, y.astype(np.int64))
    loss = float(losses.sum() / B)
    if not np.isfinite(loss):
        raise NonFiniteLossError()
    dlogits /= B

    dBeta = A.T @ dlogits
    dc = dlogits.sum(axis=0)
    dA = dlogits @ model.Beta.T
    dZ = np.where(Z > 0, dA, 0.0)
    dW = dZ.T @ X
    db = dZ.sum(axis=0)
    return loss, Grads(W=dW, b=db, Beta=dBeta, c=dc)


def mean_loss(model: MlpModel, X, y) -> float:
    """Mean cross-entropy of the model on (X, y), without gradients."""
    X = np.asarray(X, dtype=np.float64)
    Z = X @ model.W.T + model.b
    logits = np.maximum(Z, 0.0) @ model.Beta + model.c
    if model.C == 1:
        losses, _ = _binary_loss_dlogits(logits, np.asarray(y, dtype=np.float64))
    else:
        losses, _ = _softmax_loss_dlogits(logits, np.asarray(y, dtype=np.int64))
    return float(losses.mean())


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


def _adam_update(theta, g, m, v, t, hy: AdamHyper):
    if hy.decay_mode == "coupled":
        g = g + hy.weight_decay * theta
    m = hy.beta1 * m + (1.0 - hy.beta1) * g
    v = hy.beta2 * v + (1.0 - hy.beta2) * (g * g)
    mhat = m / (1.0 - hy.beta1**t)
    vhat = v / (1.0 - hy.beta2**t)
    step = hy.lr * mhat / (np.sqrt(vhat) + hy.eps)
    if hy.decay_mode == "decoupled":
        step = step + hy.lr * hy.weight_decay * theta
    return theta - step, m, v


def adam_step(model: MlpModel, grads: Grads, state: AdamState) -> tuple[MlpModel, AdamState]:
    """One Adam update with bias correction. Coupled decay enters as an
    L2 gradient term (g + lambda*theta) before the moment updates;
    decoupled decay shrinks the parameters after the Adam step instead."""
    for name in ("W", "b", "Beta", "c"):
        want = getattr(model, name).shape
        got = getattr(state.m, name).shape
        if want != got:
            raise StaleAdamStateError(name, want, got)
        if getattr(grads, name).shape != want:
            raise DimensionMismatchError(f"grad {name} shape", want, getattr(grads, name).shape)
    t = state.t + 1
    hy = state.hyper
    new_params = {}
    new_m = {}
    new_v = {}
    for name in ("W", "b", "Beta", "c"):
        theta, m, v = _adam_update(
            getattr(model, name), getattr(grads, name),
            getattr(state.m, name), getattr(state.v, name), t, hy,
        )
        new_params[name] = theta
        new_m[name] = m
        new_v[name] = v
    return (
        replace(model, **new_params),
        AdamState(m=Grads(**new_m), v=Grads(**new_v), t=t, hyper=hy),
    )


# ---------------------------------------------------------------------------
# Epoch loop (dispatches to the selected kernel backend)
# ---------------------------------------------------------------------------


def _loss_kind_code(model: MlpModel, config: TrainConfig) -> int:
    if config.loss == "binary-logistic":
        if model.C != 1:
            raise DimensionMismatchError("binary-logistic head width C", 1, model.C)
        return 0
    if model.C < 2:
        raise DimensionMismatchError("softmax-ce head width C", ">=2", model.C)
    return 1


def train_epoch(
    model: MlpModel,
    state: AdamState,
    dataset,
    config: TrainConfig,
    rng: np.random.Generator,
    backend: str | None = None,
) -> tuple[MlpModel, AdamState, float]:
    """One pass over the dataset: shuffle, split into batches of
    ``config.batch_size`` (last one may be short), one Adam step per batch.

    Returns the new model, new state, and the epoch loss (mean of batch
    losses weighted by batch size). Raises NonFiniteLossError with the
    offending batch index if the loss diverges.
    """
    X = model_inputs(model, dataset.X)
    y = np.ascontiguousarray(dataset.y, dtype=np.int64)
    n = len(y)
    if n == 0:
        raise DimensionMismatchError("dataset size", ">=1", 0)
    loss_kind = _loss_kind_code(model, config)
    order = rng.permutation(n).astype(np.int64)

    kern = kernels.get(backend)
    W = model.W.copy()
    b = model.b.copy()
    Beta = model.Beta.copy()
    c = model.c.copy()
    m = Grads(state.m.W.copy(), state.m.b.copy(), state.m.Beta.copy(), state.m.c.copy())
    v = Grads(state.v.W.copy(), state.v.b.copy(), state.v.Beta.copy(), state.v.c.copy())
    hy = state.hyper

    total, t, bad_batch = kern.run_epoch(
        W, b, Beta, c,
        m.W, m.b, m.Beta, m.c,
        v.W, v.b, v.Beta, v.c,
        state.t, X, y, order, config.batch_size,
        hy.lr, hy.beta1, hy.beta2, hy.eps, hy.weight_decay, loss_kind,
        0 if hy.decay_mode == "coupled" else 1,
    )
    if bad_batch >= 0:
        raise NonFiniteLossError(batch=bad_batch)
    new_model = replace(model, W=W, b=b, Beta=Beta, c=c)
    new_state = AdamState(m=m, v=v, t=t, hyper=hy)
    return new_model, new_state, total / n


def head_width(dataset, config: TrainConfig) -> int:
    """Output width implied by the loss choice: 1 logit for binary-logistic,
    one logit per class for softmax."""
    if config.loss == "binary-logistic":
        if dataset.C != 2:
            raise DimensionMismatchError("binary-logistic class count", 2, dataset.C)
        return 1
    return dataset.C


def train_model(
    dataset,
    config: TrainConfig,
    h: int,
    backend: str | None = None,
) -> tuple[MlpModel, AdamState, list[float]]:
    """Plain training: init from the seed's init stream, run config.epochs
    epochs shuffled by the seed's shuffle stream. Returns per-epoch losses."""
    C = head_width(dataset, config)
    model = init_model(dataset.p, h, C, rng_stream(config.seed, STREAM_INIT))
    state = init_adam_state(model, config.hyper)
    shuffle_rng = rng_stream(config.seed, STREAM_SHUFFLE)
    losses = []
    for epoch in range(1, config.epochs + 1):
        try:
            model, state, loss = train_epoch(model, state, dataset, config, shuffle_rng, backend)
        except NonFiniteLossError as err:
            raise err.with_epoch(epoch) from None
        losses.append(loss)
    return model, state, losses
