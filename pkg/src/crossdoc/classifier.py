"""Per-path MLP scores, max pooling over paths, threshold prediction and the bag loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn

THETA = 0.0


@dataclass
class BagScores:
    per_path: np.ndarray  # N x |R|
    pooled: np.ndarray  # |R|
    predicted: frozenset[str]
    input_digest: str | None = None
    path_ids: list[str] = field(default_factory=list)


def init_classifier_params(d: int, n_relations: int, rng, prefix="cls") -> dict[str, np.ndarray]:
    p: dict[str, np.ndarray] = {}
    nn.init_linear(p, f"{prefix}.l1", d, d, rng, scale=np.sqrt(2.0))
    nn.init_linear(p, f"{prefix}.l2", d, n_relations, rng)
    return p


def mlp_forward(reps, params, prefix="cls"):
    h, _ = nn.linear_forward(reps, params, f"{prefix}.l1")
    hr = np.maximum(h, 0.0)
    y, _ = nn.linear_forward(hr, params, f"{prefix}.l2")
    return y, (reps, h, hr)


def mlp_backward(dy, cache, params, grads, prefix="cls"):
    reps, h, hr = cache
    dhr = nn.linear_backward(dy, hr, params, grads, f"{prefix}.l2")
    return nn.linear_backward(dhr * (h > 0), reps, params, grads, f"{prefix}.l1")


def pool(per_path: np.ndarray):
    """Column-wise max over paths; also returns the winning path per relation."""
    arg = per_path.argmax(axis=0)
    return per_path[arg, np.arange(per_path.shape[1])], arg


def predict(pooled, labels, theta=THETA) -> frozenset[str]:
    return frozenset(lab for lab, s in zip(labels, pooled) if s > theta)


def score_bag(reps, params, labels, theta=THETA, prefix="cls") -> BagScores:
    if hasattr(reps[0], "vector"):
        path_ids = [r.path_id for r in reps]
        reps = np.stack([r.vector for r in reps])
    else:
        path_ids = [str(i) for i in range(len(reps))]
    per_path, _ = mlp_forward(np.asarray(reps), params, prefix)
    pooled, _ = pool(per_path)
    return BagScores(per_path, pooled, predict(pooled, labels, theta), path_ids=path_ids)


def _lse_with(theta, values):
    """log(e^theta + sum(e^values)) and the softmax weights of ``values``."""
    if len(values) == 0:
        return float(theta), np.zeros(0)
    m = max(theta, float(values.max()))
    ev = np.exp(values - m)
    z = np.exp(theta - m) + ev.sum()
    return m + np.log(z), ev / z


def bag_loss(pooled, gold_mask, theta=THETA, literal=False):
    """Adaptive-threshold bag loss and its gradient w.r.t. ``pooled``.

    Negatives push below ``theta`` through log(e^theta + sum e^y). Positives
    enter the second term as e^-y so that minimising pushes them above theta;
    ``literal=True`` uses e^+y there instead.
    """
    pooled = np.asarray(pooled, dtype=float)
    gold_mask = np.asarray(gold_mask, dtype=bool)
    neg = ~gold_mask
    l1, w1 = _lse_with(theta, pooled[neg])
    sign = 1.0 if literal else -1.0
    l2, w2 = _lse_with(-theta, sign * pooled[gold_mask])
    grad = np.zeros_like(pooled)
    grad[neg] = w1
    grad[gold_mask] = sign * w2
    return float(l1 + l2), grad
