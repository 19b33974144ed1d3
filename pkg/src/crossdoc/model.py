"""End-to-end model: bag preparation (parameter-free) and the differentiable forward/backward."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import classifier, encoder, reasoner
from .classifier import BagScores
from .context import Context, ContextConfig, ContextGenerator
from .corpus import Bag
from .encoder import EncoderConfig, MarkedSequence
from .errors import ValidationError
from .filters import FilterConfig, InformativeContext, filter_bag
from .reasoner import ReasonerConfig

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    relations: tuple[str, ...]
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    reasoner: ReasonerConfig = field(default_factory=ReasonerConfig)
    theta: float = classifier.THETA
    literal_loss: bool = False

    def to_dict(self):
        return {
            "relations": list(self.relations),
            "encoder": asdict(self.encoder),
            "reasoner": asdict(self.reasoner),
            "theta": self.theta,
            "literal_loss": self.literal_loss,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            relations=tuple(d["relations"]),
            encoder=EncoderConfig(**d["encoder"]),
            reasoner=ReasonerConfig(**d["reasoner"]),
            theta=d.get("theta", classifier.THETA),
            literal_loss=d.get("literal_loss", False),
        )


@dataclass
class PreparedBag:
    """Everything about a bag that does not depend on model parameters."""

    bag: Bag
    context: Context | None
    ictx: InformativeContext
    seq: MarkedSequence
    ids: np.ndarray
    entities: list[str]
    pool: np.ndarray  # |E| x L pooling weights from token vectors to entity vectors
    masks: np.ndarray  # paths x |E|^2
    gold: np.ndarray  # |R| bool
    mention_scores: dict = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def path_ids(self):
        return [p.path_id for p in self.bag.paths]


def _entity_pooling(seq: MarkedSequence, bag: Bag, mention_scores, max_entities):
    by_entity: dict[str, dict[str, list[list[int]]]] = defaultdict(lambda: defaultdict(list))
    for sp in seq.spans:
        pos = seq.content_positions(sp)
        if pos:
            by_entity[sp.entity][sp.path_id].append(pos)

    diagnostics = []
    bridges = sorted(e for e in by_entity if e not in (bag.source, bag.target))
    if len(bridges) + 2 > max_entities:
        best = {e: max((s[e].total for s in mention_scores.values() if e in s), default=0.0) for e in bridges}
        keep = sorted(bridges, key=lambda e: (-best[e], e))[: max_entities - 2]
        diagnostics.append(f"truncated {len(bridges) - len(keep)} bridge entities")
        bridges = sorted(keep)
    entities = [bag.source, bag.target] + bridges

    n_tok = len(seq)
    pool = np.zeros((len(entities), n_tok))
    for i, e in enumerate(entities):
        paths = by_entity.get(e)
        if not paths:
            # source/target absent from the selected text: fall back to the sequence mean
            diagnostics.append(f"no span for {e}; using sequence mean")
            pool[i] = 1.0 / n_tok
            continue
        for mention_list in paths.values():
            for pos in mention_list:
                pool[i, pos] += 1.0 / (len(paths) * len(mention_list) * len(pos))
    return entities, pool, diagnostics


def prepare_bag(
    bag: Bag,
    relations,
    context_fn: ContextGenerator | None,
    ctx_cfg: ContextConfig,
    filter_cfg: FilterConfig,
    enc_cfg: EncoderConfig,
    rsn_cfg: ReasonerConfig,
) -> PreparedBag:
    ctx = None
    if context_fn is not None and ctx_cfg.mode != "none":
        ctx = context_fn(bag.source, bag.target, ctx_cfg)
    mscores, _, ictx = filter_bag(bag, ctx, filter_cfg)
    seq = encoder.mark_sequence(ictx, bag, enc_cfg.max_positions)
    ids = encoder.token_ids(seq.tokens, enc_cfg.vocab_hash_buckets)
    entities, pool, diag = _entity_pooling(seq, bag, mscores, rsn_cfg.max_entities)
    path_sets = [{bag.source, bag.target} | set(p.mentioned_entities) for p in bag.paths]
    masks = reasoner.path_cell_masks(entities, path_sets)
    index = {r: i for i, r in enumerate(relations)}
    gold = np.zeros(len(relations), dtype=bool)
    for r in bag.gold_relations:
        gold[index[r]] = True
    return PreparedBag(bag, ctx, ictx, seq, ids, entities, pool, masks, gold, mscores, diag)


def init_params(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    d = cfg.encoder.embed_dim
    params = encoder.init_encoder_params(cfg.encoder, rng)
    params.update(reasoner.init_reasoner_params(d, cfg.reasoner, rng))
    params.update(classifier.init_classifier_params(d, len(cfg.relations), rng))
    return params


class Model:
    def __init__(self, cfg: ModelConfig, params=None, seed=0):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, seed)

    def _forward(self, pb: PreparedBag):
        cfg, params = self.cfg, self.params
        h, enc_cache = encoder.encoder_forward(pb.ids, params, cfg.encoder)
        x = pb.pool @ h
        flat, cell_cache = reasoner.cells_forward(x, params)
        readouts, final, rs_cache = reasoner.reason_forward(flat, pb.masks, params, cfg.reasoner)
        per_path, mlp_cache = classifier.mlp_forward(readouts, params)
        pooled, arg = classifier.pool(per_path)
        scores = BagScores(
            per_path,
            pooled,
            classifier.predict(pooled, cfg.relations, cfg.theta),
            input_digest=pb.ictx.digest(),
            path_ids=pb.path_ids,
        )
        cache = (enc_cache, cell_cache, rs_cache, mlp_cache, arg, final)
        return scores, cache

    def forward(self, pb: PreparedBag) -> BagScores:
        return self._forward(pb)[0]

    def relation_matrix(self, pb: PreparedBag):
        """(input cells, final cells) as |E|^2 x d arrays, for debugging dumps."""
        h, _ = encoder.encoder_forward(pb.ids, self.params, self.cfg.encoder)
        flat, _ = reasoner.cells_forward(pb.pool @ h, self.params)
        _, final, _ = reasoner.reason_forward(flat, pb.masks, self.params, self.cfg.reasoner)
        return flat, final

    def loss(self, pb: PreparedBag) -> float:
        scores = self.forward(pb)
        return classifier.bag_loss(scores.pooled, pb.gold, self.cfg.theta, self.cfg.literal_loss)[0]

    def loss_and_grad(self, pb: PreparedBag, grads=None, scale=1.0):
        """Loss of one bag; gradients (times ``scale``) are accumulated into ``grads``."""
        if grads is None:
            grads = {}
        cfg, params = self.cfg, self.params
        scores, (enc_cache, cell_cache, rs_cache, mlp_cache, arg, _) = self._forward(pb)
        loss, dpooled = classifier.bag_loss(scores.pooled, pb.gold, cfg.theta, cfg.literal_loss)
        dper = np.zeros_like(scores.per_path)
        dper[arg, np.arange(dper.shape[1])] = dpooled * scale
        dread = classifier.mlp_backward(dper, mlp_cache, params, grads)
        dflat = reasoner.reason_backward(dread, rs_cache, params, grads, cfg.reasoner)
        dx = reasoner.cells_backward(dflat, cell_cache, params, grads)
        encoder.encoder_backward(pb.pool.T @ dx, enc_cache, params, grads, cfg.encoder)
        return loss, grads, scores


def save_checkpoint(path, model: Model, extra=None):
    manifest = {
        "version": CHECKPOINT_VERSION,
        "model": model.cfg.to_dict(),
        "shapes": {k: list(v.shape) for k, v in sorted(model.params.items())},
        "extra": extra or {},
    }
    arrays = {k: v for k, v in model.params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __manifest__=np.array(json.dumps(manifest, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[Model, dict]:
    with np.load(Path(path), allow_pickle=False) as z:
        manifest = json.loads(str(z["__manifest__"]))
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise ValidationError(f"{path}: unsupported checkpoint version {manifest.get('version')}")
        params = {k: z[k].copy() for k in z.files if k != "__manifest__"}
    for k, shape in manifest["shapes"].items():
        if k not in params or list(params[k].shape) != shape:
            raise ValidationError(f"{path}: tensor {k} missing or mis-shaped")
    return Model(ModelConfig.from_dict(manifest["model"]), params), manifest.get("extra", {})


def save_encoder(path, model: Model):
    enc = {k: v for k, v in model.params.items() if k.startswith("enc.")}
    manifest = {"version": CHECKPOINT_VERSION, "encoder": asdict(model.cfg.encoder),
                "shapes": {k: list(v.shape) for k, v in sorted(enc.items())}}
    with open(path, "wb") as fh:
        np.savez(fh, __manifest__=np.array(json.dumps(manifest, sort_keys=True)), **enc)


def load_encoder_into(path, model: Model):
    with np.load(Path(path), allow_pickle=False) as z:
        manifest = json.loads(str(z["__manifest__"]))
        if EncoderConfig(**manifest["encoder"]) != model.cfg.encoder:
            raise ValidationError(f"{path}: encoder config does not match the model's")
        for k in z.files:
            if k != "__manifest__":
                model.params[k] = z[k].copy()
