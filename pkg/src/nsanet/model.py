"""One-hidden-layer ReLU network: parameters, forward pass, node
normalization, magnitude-based node pruning and feature relevance.

The model computes ``f(x) = Beta^T relu(W x + b) + c``. It is a value
object: operations never mutate their inputs and return new models, so
instances can be copied and shared across threads freely. Arrays held by a
model are treated as immutable by convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, UnknownFeatureError

# Hidden nodes whose weight row has norm at or below this are "dead": they are
# left unnormalized, get importance 0 and are pruned first.
DEAD_NODE_NORM = 1e-12


@dataclass(frozen=True)
class MlpModel:
    """Parameters of a one-hidden-layer ReLU network.

    W: (h, p) hidden weights; row j belongs to hidden node j.
    b: (h,) hidden biases.
    Beta: (h, C) output weights; C is 1 for binary models with one logit.
    c: (C,) output bias.
    feature_ids: (p,) original column index of each surviving input feature.
    """

    W: np.ndarray
    b: np.ndarray
    Beta: np.ndarray
    c: np.ndarray
    feature_ids: np.ndarray

    @property
    def h(self) -> int:
        return self.W.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[1]

    @property
    def C(self) -> int:
        return self.Beta.shape[1]

    @classmethod
    def create(cls, W, b, Beta, c, feature_ids=None) -> "MlpModel":
        """Build a model from array-likes, coercing dtypes and validating."""
        W = np.ascontiguousarray(W, dtype=np.float64)
        b = np.ascontiguousarray(b, dtype=np.float64)
        Beta = np.ascontiguousarray(Beta, dtype=np.float64)
        c = np.ascontiguousarray(c, dtype=np.float64)
        if feature_ids is None:
            feature_ids = np.arange(W.shape[1], dtype=np.int64)
        else:
            feature_ids = np.ascontiguousarray(feature_ids, dtype=np.int64)
        model = cls(W=W, b=b, Beta=Beta, c=c, feature_ids=feature_ids)
        model.validate()
        return model

    def validate(self) -> None:
        if self.W.ndim != 2 or self.Beta.ndim != 2:
            raise DimensionMismatchError("W/Beta rank", 2, (self.W.ndim, self.Beta.ndim))
        h, p = self.W.shape
        if h < 1 or p < 1 or self.C < 1:
            raise DimensionMismatchError("model sizes h,p,C >= 1", ">=1", (h, p, self.C))
        if self.b.shape != (h,):
            raise DimensionMismatchError("b shape", (h,), self.b.shape)
        if self.Beta.shape[0] != h:
            raise DimensionMismatchError("Beta rows", h, self.Beta.shape[0])
        if self.c.shape != (self.C,):
            raise DimensionMismatchError("c shape", (self.C,), self.c.shape)
        if self.feature_ids.shape != (p,):
            raise DimensionMismatchError("feature_ids shape", (p,), self.feature_ids.shape)
        if len(set(self.feature_ids.tolist())) != p or self.feature_ids.min() < 0:
            raise UnknownFeatureError(self.feature_ids.tolist(), p)
        for name, a in (("W", self.W), ("b", self.b), ("Beta", self.Beta), ("c", self.c)):
            if not np.all(np.isfinite(a)):
                raise DimensionMismatchError(f"{name} finiteness", "finite", "non-finite")


@dataclass(frozen=True)
class FeatureRelevance:
    """Squared group weight per input feature and its descending ordering.

    r2[i] is the sum over hidden nodes of W[j, i]**2. ``ordering`` sorts
    feature columns by decreasing r2, ties broken by lower column index.
    """

    r2: np.ndarray
    ordering: np.ndarray


def forward(model: MlpModel, X) -> np.ndarray:
    """Logits for a batch: relu(X W^T + b) Beta + c.

    Accepts a single sample (p,) or a batch (n, p); returns logits shaped
    (C,) or (n, C) respectively.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.p:
        actual = X.shape[1] if X.ndim == 2 else X.shape
        raise DimensionMismatchError("input feature count", model.p, actual)
    if not np.all(np.isfinite(X)):
        raise DimensionMismatchError("input finiteness", "finite", "non-finite")
    A = np.maximum(X @ model.W.T + model.b, 0.0)
    logits = A @ model.Beta + model.c
    return logits[0] if single else logits


def model_inputs(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Select from a full-width data matrix the columns this model still uses."""
    p_full = X.shape[1]
    ids = model.feature_ids
    if ids.shape[0] == p_full and np.array_equal(ids, np.arange(p_full)):
        return X
    if ids.max() >= p_full:
        raise DimensionMismatchError("data feature count", int(ids.max()) + 1, p_full)
    return np.ascontiguousarray(X[:, ids])


def normalize_nodes(model: MlpModel) -> MlpModel:
    """Rescale each live hidden node so its weight row has unit norm.

    Uses ReLU positive homogeneity: (w, b, beta) -> (w/s, b/s, s*beta) with
    s = ||w||, which leaves the network function unchanged. Rows with
    ||w|| <= DEAD_NODE_NORM are left alone (dead nodes).
    """
    norms = np.linalg.norm(model.W, axis=1)
    scale = np.where(norms > DEAD_NODE_NORM, norms, 1.0)
    return replace(
        model,
        W=model.W / scale[:, None],
        b=model.b / scale,
        Beta=model.Beta * scale[:, None],
    )


def node_importance(model: MlpModel) -> np.ndarray:
    """Magnitude of each node's output weight: |beta_j| for C=1, L2 norm of
    the Beta row otherwise. Dead nodes score 0.

    Meaningful as a ranking only after normalize_nodes.
    """
    imp = np.linalg.norm(model.Beta, axis=1)
    norms = np.linalg.norm(model.W, axis=1)
    return np.where(norms > DEAD_NODE_NORM, imp, 0.0)


def prune_nodes(model: MlpModel, keep: int) -> MlpModel:
    """Keep the ``keep`` highest-importance hidden nodes, compacting arrays.

    Ties are broken in favor of the lower original index. Expects the model
    to have been normalized in the same iteration.
    """
    if not 1 <= keep <= model.h:
        raise DimensionMismatchError("nodes to keep", f"1..{model.h}", keep)
    if keep == model.h:
        return model
    imp = node_importance(model)
    top = np.argsort(-imp, kind="stable")[:keep]
    rows = np.sort(top)
    return replace(
        model,
        W=np.ascontiguousarray(model.W[rows]),
        b=np.ascontiguousarray(model.b[rows]),
        Beta=np.ascontiguousarray(model.Beta[rows]),
    )


def feature_relevance(model: MlpModel) -> FeatureRelevance:
    """Group weight r2[i] = sum_j W[j,i]^2 per input feature, plus the
    descending ordering (ties to the lower index).

    Expects a normalized model so relevances are scale-free.
    """
    r2 = np.sum(model.W * model.W, axis=0)
    ordering = np.argsort(-r2, kind="stable")
    return FeatureRelevance(r2=r2, ordering=ordering)


def prune_features(model: MlpModel, keep_ids) -> MlpModel:
    """Keep only the given current column indices, dropping the rest of W.

    ``keep_ids`` index the model's current columns (0..p-1); feature_ids is
    remapped so surviving columns still point at their original data columns.
    """
    ids = np.asarray(keep_ids, dtype=np.int64)
    if ids.size == 0 or len(set(ids.tolist())) != ids.size:
        raise UnknownFeatureError(ids.tolist(), model.p)
    if ids.min() < 0 or ids.max() >= model.p:
        raise UnknownFeatureError(ids.tolist(), model.p)
    if ids.size == model.p:
        return model
    cols = np.sort(ids)
    return replace(
        model,
        W=np.ascontiguousarray(model.W[:, cols]),
        feature_ids=np.ascontiguousarray(model.feature_ids[cols]),
    )


# ---------------------------------------------------------------------------
# Serialization. Plain JSON numbers round-trip float64 exactly in Python
# (shortest-repr decimal), which the round-trip tests pin down bit-for-bit.
# ---------------------------------------------------------------------------


def model_to_dict(model: MlpModel) -> dict:
    model.validate()
    return {
        "h": model.h,
        "p": model.p,
        "C": model.C,
        "W": model.W.tolist(),
        "b": model.b.tolist(),
        "Beta": model.Beta.tolist(),
        "c": model.c.tolist(),
        "feature_ids": model.feature_ids.tolist(),
    }


def model_from_dict(d: dict) -> MlpModel:
    model = MlpModel.create(d["W"], d["b"], d["Beta"], d["c"], d["feature_ids"])
    expect = (d["h"], d["p"], d["C"])
    if (model.h, model.p, model.C) != expect:
        raise DimensionMismatchError("serialized dims", expect, (model.h, model.p, model.C))
    return model


def save_model(model: MlpModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n")


def load_model(path) -> MlpModel:
    return model_from_dict(json.loads(Path(path).read_text()))
