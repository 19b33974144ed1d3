"""Bag preparation for a corpus, the AdamW training loop and evaluation."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .classifier import BagScores
from .config import RunConfig
from .context import ContextGenerator
from .errors import NumericalError, ValidationError
from .kg import KnowledgeGraph
from .model import Model, ModelConfig, PreparedBag, prepare_bag
from .nn import AdamW

log = logging.getLogger(__name__)


def model_config(cfg: RunConfig, relations) -> ModelConfig:
    return ModelConfig(tuple(relations), cfg.encoder, cfg.reasoner, literal_loss=cfg.train.literal_loss)


def prepare_corpus(bags, kg: KnowledgeGraph | None, cfg: RunConfig, relations, context_fn=None) -> list[PreparedBag]:
    if context_fn is None and kg is not None:
        context_fn = ContextGenerator(kg)
    return [
        prepare_bag(bag, relations, context_fn, cfg.context, cfg.filter, cfg.encoder, cfg.reasoner)
        for bag in bags
    ]


@dataclass
class TrainResult:
    model: Model
    log: list[dict] = field(default_factory=list)


def _clip(grads, max_norm):
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        for g in grads.values():
            g *= max_norm / total
    return total


def train(prepared: list[PreparedBag], cfg: RunConfig, relations, model: Model | None = None,
          log_fh=None, seed: int | None = None) -> TrainResult:
    """Mini-batch training; each step averages gradients over ``batch_size`` bags."""
    if not prepared:
        raise ValidationError("cannot train on an empty corpus")
    seed = cfg.seed if seed is None else seed
    tc = cfg.train
    model = model or Model(model_config(cfg, relations), seed=seed)
    opt = AdamW(model.params, lr=tc.learning_rate, betas=(tc.beta1, tc.beta2), eps=tc.adam_eps,
                weight_decay=tc.weight_decay)
    order_rng = random.Random(seed)
    history = []
    order = list(range(len(prepared)))
    for epoch in range(1, tc.epochs + 1):
        order_rng.shuffle(order)
        losses, preds, golds = [], [], []
        for start in range(0, len(order), tc.batch_size):
            batch = [prepared[i] for i in order[start : start + tc.batch_size]]
            grads: dict[str, np.ndarray] = {}
            for pb in batch:
                loss, grads, scores = model.loss_and_grad(pb, grads, scale=1.0 / len(batch))
                if not math.isfinite(loss):
                    raise NumericalError(f"epoch {epoch}: non-finite loss on bag {pb.bag.bag_id}")
                losses.append(loss)
                preds.append(scores.predicted)
                golds.append(pb.bag.gold_relations)
            if tc.clip_norm:
                _clip(grads, tc.clip_norm)
            opt.step(model.params, grads)
        entry = {"epoch": epoch, "loss": float(np.mean(losses)), "train_f1": metrics.compute_f1(preds, golds)}
        history.append(entry)
        log.info("epoch %d loss %.5f train_f1 %.4f", epoch, entry["loss"], entry["train_f1"])
        if log_fh is not None:
            log_fh.write(json.dumps(entry) + "\n")
            log_fh.flush()
    return TrainResult(model, history)


def predict_all(model: Model, prepared: list[PreparedBag]) -> list[BagScores]:
    return [model.forward(pb) for pb in prepared]


def evaluate(model: Model, prepared: list[PreparedBag], scores: list[BagScores] | None = None) -> dict:
    scores = scores if scores is not None else predict_all(model, prepared)
    relations = model.cfg.relations
    preds = [s.predicted for s in scores]
    golds = [pb.bag.gold_relations for pb in prepared]
    flat = []
    for s, pb in zip(scores, prepared):
        for r, lab in enumerate(relations):
            flat.append((float(s.pooled[r]), lab in pb.bag.gold_relations))
    n_pos = sum(y for _, y in flat)
    auc = metrics.compute_auc(flat) if 0 < n_pos < len(flat) else 0.0
    return {
        "f1": metrics.compute_f1(preds, golds),
        "auc": auc,
        "accuracy": float(np.mean([p == g for p, g in zip(preds, golds)])) if preds else 0.0,
        "per_relation_f1": metrics.per_relation_f1(preds, golds, relations),
        "counts": {"positive": sum(1 for g in golds if g), "na": sum(1 for g in golds if not g)},
    }


def prediction_rows(prepared: list[PreparedBag], scores: list[BagScores], relations):
    for pb, s in zip(prepared, scores):
        yield {
            "bag_id": pb.bag.bag_id,
            "gold": "|".join(sorted(pb.bag.gold_relations)) or "NA",
            "predicted": "|".join(sorted(s.predicted)) or "NA",
            "scores": json.dumps({lab: round(float(v), 6) for lab, v in zip(relations, s.pooled)}),
        }
