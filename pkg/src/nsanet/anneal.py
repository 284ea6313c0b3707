"""Decaying count schedules and the annealed pruning training loops.

A schedule interpolates a count from ``start_count`` down to ``end_count``
over ``n_iter`` epochs:

    value(e) = end + round_half_up((start - end) * max(0, (N - 2t) / (2tu + N)))

with t = max(0, e - onset), N the decay-window length, and u the sharpness.
The node schedule uses onset = n_iter/4 and N = 3*n_iter/4; the feature
schedule uses onset = 3*n_iter/5 and N = 2*n_iter/5. Both default to u = 30.
Arithmetic is exact (rationals), so the integer outputs carry no float
rounding; the bracket is resolved as round-half-up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DimensionMismatchError, NonFiniteLossError
from .model import (
    MlpModel,
    feature_relevance,
    normalize_nodes,
    prune_features,
    prune_nodes,
)
from .train import (
    STREAM_INIT,
    STREAM_SHUFFLE,
    AdamState,
    TrainConfig,
    head_width,
    init_adam_state,
    init_model,
    rng_stream,
    train_epoch,
)

DEFAULT_MU = 30


@dataclass(frozen=True)
class AnnealSchedule:
    """Epoch-indexed target count, non-increasing from start to end."""

    start_count: int
    end_count: int
    n_iter: int
    mu: Fraction
    onset: Fraction
    plateau: Fraction

    def __post_init__(self):
        if not 1 <= self.end_count <= self.start_count:
            raise DimensionMismatchError("schedule counts", "1 <= end <= start", (self.start_count, self.end_count))
        if self.n_iter < 1:
            raise DimensionMismatchError("n_iter", ">=1", self.n_iter)
        if self.mu <= 0 or self.plateau <= 0:
            raise DimensionMismatchError("schedule mu/plateau", "> 0", (self.mu, self.plateau))


def node_schedule(start_nodes: int, end_nodes: int, n_iter: int, mu=DEFAULT_MU) -> AnnealSchedule:
    """Hidden-node schedule: flat for the first quarter of training, then
    decays over a window three quarters long."""
    return AnnealSchedule(
        start_count=start_nodes,
        end_count=end_nodes,
        n_iter=n_iter,
        mu=Fraction(mu),
        onset=Fraction(n_iter, 4),
        plateau=Fraction(3 * n_iter, 4),
    )


def feature_schedule(start_features: int, end_features: int, n_iter: int, mu=DEFAULT_MU) -> AnnealSchedule:
    """Feature schedule: flat for the first 60% of training, then decays
    over the remaining window of length 0.4 * n_iter."""
    return AnnealSchedule(
        start_count=start_features,
        end_count=end_features,
        n_iter=n_iter,
        mu=Fraction(mu),
        onset=Fraction(3 * n_iter, 5),
        plateau=Fraction(2 * n_iter, 5),
    )


def schedule_value(schedule: AnnealSchedule, e: int) -> int:
    """Target count at epoch e (1-based, 1 <= e <= n_iter)."""
    if not 1 <= e <= schedule.n_iter:
        raise DimensionMismatchError("epoch", f"1..{schedule.n_iter}", e)
    shifted = Fraction(e) - schedule.onset
    if shifted < 0:
        shifted = Fraction(0)
    numer = schedule.plateau - 2 * shifted
    if numer <= 0:
        factor = Fraction(0)
    else:
        factor = numer / (2 * shifted * schedule.mu + schedule.plateau)
    raw = (schedule.start_count - schedule.end_count) * factor
    return schedule.end_count + math.floor(raw + Fraction(1, 2))


@dataclass
class PruneTrace:
    """Per-epoch record of a pruning run; counts never increase."""

    epochs: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    node_counts: list[int] = field(default_factory=list)
    feature_counts: list[int] = field(default_factory=list)
    feature_ids: list[tuple[int, ...]] = field(default_factory=list)

    def append(self, epoch: int, loss: float, model: MlpModel) -> None:
        self.epochs.append(epoch)
        self.losses.append(loss)
        self.node_counts.append(model.h)
        self.feature_counts.append(model.p)
        self.feature_ids.append(tuple(int(i) for i in model.feature_ids))

    def rows(self) -> list[list]:
        """CSV rows (epoch, loss, node_count, feature_count, feature_ids)."""
        return [
            [e, loss, h, p, ";".join(str(i) for i in ids)]
            for e, loss, h, p, ids in zip(
                self.epochs, self.losses, self.node_counts, self.feature_counts, self.feature_ids
            )
        ]

    HEADER = ("epoch", "loss", "node_count", "feature_count", "feature_ids")


def _anneal_loop(
    dataset,
    start_nodes: int,
    node_sched: AnnealSchedule | None,
    feat_sched: AnnealSchedule | None,
    n_iter: int,
    config: TrainConfig,
    backend: str | None,
) -> tuple[MlpModel, PruneTrace]:
    C = head_width(dataset, config)
    model = init_model(dataset.p, start_nodes, C, rng_stream(config.seed, STREAM_INIT))
    state = init_adam_state(model, config.hyper)
    shuffle_rng = rng_stream(config.seed, STREAM_SHUFFLE)
    trace = PruneTrace()

    for e in range(1, n_iter + 1):
        try:
            model, state, loss = train_epoch(model, state, dataset, config, shuffle_rng, backend)
        except NonFiniteLossError as err:
            raise err.with_epoch(e) from None
        model = normalize_nodes(model)
        pruned = False
        if node_sched is not None:
            target_h = schedule_value(node_sched, e)
            if target_h < model.h:
                model = prune_nodes(model, target_h)
                pruned = True
        if feat_sched is not None:
            target_p = schedule_value(feat_sched, e)
            if target_p < model.p:
                keep = np.sort(feature_relevance(model).ordering[:target_p])
                model = prune_features(model, keep)
                pruned = True
        if pruned:
            state = init_adam_state(model, config.hyper)
        trace.append(e, loss, model)
    return model, trace


def run_nsa(
    dataset,
    start_nodes: int,
    end_nodes: int,
    n_iter: int,
    config: TrainConfig,
    backend: str | None = None,
    mu=DEFAULT_MU,
) -> tuple[MlpModel, PruneTrace]:
    """Node selection with annealing: start wide, train one epoch at a time,
    normalize every epoch, and keep the scheduled number of nodes with the
    largest output-weight magnitude. Ends with exactly ``end_nodes`` nodes.

    The Adam state is rebuilt whenever pruning changes shapes.
    """
    if not 1 <= end_nodes <= start_nodes:
        raise DimensionMismatchError("node counts", "1 <= end <= start", (start_nodes, end_nodes))
    sched = node_schedule(start_nodes, end_nodes, n_iter, mu)
    return _anneal_loop(dataset, start_nodes, sched, None, n_iter, config, backend)


def run_fsa_nsa(
    dataset,
    start_nodes: int,
    end_nodes: int,
    k_target: int,
    n_iter: int,
    config: TrainConfig,
    backend: str | None = None,
    mu=DEFAULT_MU,
) -> tuple[MlpModel, PruneTrace]:
    """Node pruning interleaved with feature pruning in one n_iter-epoch
    loop: after each epoch the model is normalized, trimmed to the node
    schedule, and, once the feature schedule starts decaying, trimmed to the
    features with the largest group weight. Ends with exactly ``end_nodes``
    nodes on exactly ``k_target`` original features.
    """
    if not 1 <= k_target <= dataset.p:
        raise DimensionMismatchError("feature target", f"1..{dataset.p}", k_target)
    if not 1 <= end_nodes <= start_nodes:
        raise DimensionMismatchError("node counts", "1 <= end <= start", (start_nodes, end_nodes))
    nsched = node_schedule(start_nodes, end_nodes, n_iter, mu)
    fsched = feature_schedule(dataset.p, k_target, n_iter, mu)
    return _anneal_loop(dataset, start_nodes, nsched, fsched, n_iter, config, backend)
