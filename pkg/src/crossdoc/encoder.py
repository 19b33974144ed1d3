"""Entity/context marking and the small self-attention encoder that replaces a pretrained LM.

Any object with the ``encode(seq) -> (token_vectors, span_embeddings)`` shape of
``SpanEncoder`` can stand in for the default from-scratch encoder.
"""

from __future__ import annotations

import logging
import zlib
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import nn
from .corpus import Bag
from .errors import ConfigError, ValidationError
from .filters import InformativeContext

log = logging.getLogger(__name__)

ENT_OPEN, ENT_CLOSE = "<e>", "</e>"
CTX_OPEN, CTX_CLOSE = "<c>", "</c>"


@dataclass(frozen=True)
class EncoderConfig:
    embed_dim: int = 64
    num_layers: int = 3
    num_heads: int = 4
    vocab_hash_buckets: int = 50021
    max_positions: int = 512

    def __post_init__(self):
        if min(self.embed_dim, self.num_heads, self.vocab_hash_buckets, self.max_positions) <= 0 or self.num_layers < 0:
            raise ConfigError("encoder sizes must be positive")
        if self.embed_dim % self.num_heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")


@dataclass(frozen=True)
class Span:
    entity: str
    path_id: str
    start: int
    end: int


@dataclass(frozen=True)
class MarkedSequence:
    tokens: tuple[str, ...]
    spans: tuple[Span, ...]
    is_marker: tuple[bool, ...]
    context_span: tuple[int, int] | None = None

    def __len__(self):
        return len(self.tokens)

    def strip_markers(self) -> list[str]:
        return [t for t, m in zip(self.tokens, self.is_marker) if not m]

    def content_positions(self, span: Span) -> list[int]:
        return [i for i in range(span.start, span.end) if not self.is_marker[i]]


@dataclass(frozen=True)
class SpanEmbedding:
    entity: str
    path_id: str
    vector: np.ndarray


def _mark_sentence(tokens, mentions, doc_id):
    """Wrap mention spans of one sentence in entity markers.

    Returns (marked tokens, marker flags, [(entity, start, end)] in local marked
    coordinates). Nested mentions are wrapped outer-first; crossing spans raise.
    """
    ms = sorted({(m.token_start, m.token_end, m.entity) for m in mentions}, key=lambda x: (x[0], -x[1], x[2]))
    for i, (s1, e1, ent1) in enumerate(ms):
        for s2, e2, ent2 in ms[i + 1 :]:
            if s2 < e1 < e2:
                raise ValidationError(f"doc {doc_id}: crossing mentions {ent1}[{s1},{e1}) and {ent2}[{s2},{e2})")
    opens = defaultdict(list)
    closes = defaultdict(list)
    for j, (s, e, _) in enumerate(ms):
        opens[s].append(j)
        closes[e].append(j)
    out, flags = [], []
    starts, ends = {}, {}
    for pos in range(len(tokens) + 1):
        # inner spans close before outer ones
        for j in sorted(closes.get(pos, []), reverse=True):
            ends[j] = len(out)
            out.append(ENT_CLOSE)
            flags.append(True)
        if pos == len(tokens):
            break
        for j in opens.get(pos, []):
            out.append(ENT_OPEN)
            flags.append(True)
            starts[j] = len(out)
        out.append(tokens[pos])
        flags.append(False)
    spans = [(ms[j][2], starts[j], ends[j]) for j in range(len(ms))]
    return out, flags, spans


def mark_sequence(ictx: InformativeContext, bag: Bag, max_positions: int | None = None) -> MarkedSequence:
    tokens: list[str] = []
    flags: list[bool] = []
    spans: list[Span] = []
    ctx_span = None
    if ictx.context_tokens or not ictx.selected:
        tokens.append(CTX_OPEN)
        flags.append(True)
        start = len(tokens)
        tokens.extend(ictx.context_tokens)
        flags.extend([False] * len(ictx.context_tokens))
        ctx_span = (start, len(tokens))
        tokens.append(CTX_CLOSE)
        flags.append(True)
    for sel in ictx.selected:
        doc = bag.path(sel.ref.path_id).doc(sel.ref.role)
        marked, mflags, local = _mark_sentence(
            doc.sentences[sel.ref.sentence_index], doc.mentions_in(sel.ref.sentence_index), doc.doc_id
        )
        if max_positions is not None and len(tokens) + len(marked) > max_positions:
            log.warning("bag %s: dropping sentence %s past max_positions=%d", bag.bag_id, sel.ref, max_positions)
            continue
        off = len(tokens)
        tokens.extend(marked)
        flags.extend(mflags)
        spans.extend(Span(ent, sel.ref.path_id, off + s, off + e) for ent, s, e in local)
    return MarkedSequence(tuple(tokens), tuple(spans), tuple(flags), ctx_span)


def token_ids(tokens, buckets: int) -> np.ndarray:
    return np.array([zlib.crc32(t.encode("utf-8")) % buckets for t in tokens], dtype=np.int64)


def init_encoder_params(cfg: EncoderConfig, rng, prefix="enc") -> dict[str, np.ndarray]:
    d = cfg.embed_dim
    p = {
        f"{prefix}.emb": rng.normal(0.0, 1.0, size=(cfg.vocab_hash_buckets, d)),
        f"{prefix}.pos": rng.normal(0.0, 0.1, size=(cfg.max_positions, d)),
    }
    for i in range(cfg.num_layers):
        nn.init_block(p, f"{prefix}.{i}", d, rng)
    return p


def encoder_forward(ids, params, cfg: EncoderConfig, prefix="enc"):
    n = len(ids)
    if n > cfg.max_positions:
        raise ValidationError(f"sequence of {n} tokens exceeds max_positions={cfg.max_positions}")
    x = params[f"{prefix}.emb"][ids] + params[f"{prefix}.pos"][:n]
    caches = []
    for i in range(cfg.num_layers):
        x, c = nn.block_forward(x, params, f"{prefix}.{i}", cfg.num_heads)
        caches.append(c)
    return x, (ids, caches)


def encoder_backward(dx, cache, params, grads, cfg: EncoderConfig, prefix="enc"):
    ids, caches = cache
    for i in reversed(range(cfg.num_layers)):
        dx = nn.block_backward(dx, caches[i], params, grads, f"{prefix}.{i}")
    emb_key, pos_key = f"{prefix}.emb", f"{prefix}.pos"
    if emb_key not in grads:
        grads[emb_key] = np.zeros_like(params[emb_key])
    np.add.at(grads[emb_key], ids, dx)
    if pos_key not in grads:
        grads[pos_key] = np.zeros_like(params[pos_key])
    grads[pos_key][: len(ids)] += dx


def span_embeddings(seq: MarkedSequence, h: np.ndarray) -> list[SpanEmbedding]:
    """One vector per (entity, path): mean over mentions of each mention's mean token vector."""
    groups: dict[tuple[str, str], list[np.ndarray]] = defaultdict(list)
    for sp in seq.spans:
        pos = seq.content_positions(sp)
        groups[(sp.entity, sp.path_id)].append(h[pos].mean(axis=0))
    return [SpanEmbedding(e, p, np.mean(vs, axis=0)) for (e, p), vs in sorted(groups.items())]


class SpanEncoder:
    """Default encoder: hashed token + learned position embeddings, then pre-norm attention blocks."""

    def __init__(self, cfg: EncoderConfig, params=None, seed=0):
        self.cfg = cfg
        self.params = params if params is not None else init_encoder_params(cfg, np.random.default_rng(seed))

    def encode(self, seq: MarkedSequence):
        h, _ = encoder_forward(token_ids(seq.tokens, self.cfg.vocab_hash_buckets), self.params, self.cfg)
        return h, span_embeddings(seq, h)


def encode(seq: MarkedSequence, params, cfg: EncoderConfig):
    return SpanEncoder(cfg, params).encode(seq)
