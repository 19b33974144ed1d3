"""Entity-based sentence filter followed by the relevance-based filter.

The entity filter scores every bridge entity of a text path with

    score(e) = lambda * S1(e) + eta * S2(e) + kappa * S3(e)

and ranks sentences by the summed scores of the bridges they mention. The top
K sentences of the bag are then re-ranked by term-frequency cosine similarity
against the sentences that mention the target entity, and packed into the
encoder's token budget together with the knowledge-graph context tokens.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

from .context import Context
from .corpus import Bag, TextPath
from .errors import ConfigError

# Every wrapped span costs two marker tokens in the encoder input.
MARKER_COST = 2


@dataclass(frozen=True)
class FilterConfig:
    lambda_w: float = 0.1
    eta_w: float = 0.01
    kappa_w: float = 0.001
    top_k: int = 16
    token_budget: int = 512
    relevance_keep: int | None = None
    entity_filter: bool = True
    relevance_filter: bool = True
    theta1_mode: str = "either"

    def __post_init__(self):
        if min(self.lambda_w, self.eta_w, self.kappa_w) < 0:
            raise ConfigError("filter weights must be >= 0")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.token_budget < 16:
            raise ConfigError("token_budget must be >= 16")
        if self.theta1_mode not in ("either", "both"):
            raise ConfigError("theta1_mode must be 'either' or 'both'")
        if self.relevance_keep is not None and self.relevance_keep < 1:
            raise ConfigError("relevance_keep must be >= 1 when set")


@dataclass(frozen=True)
class MentionScore:
    entity: str
    s1: int
    s2: int
    s3: int
    total: float


class SentenceRef(NamedTuple):
    path_id: str
    role: str
    sentence_index: int


@dataclass(frozen=True)
class Candidate:
    ref: SentenceRef
    importance: float


@dataclass
class CandidateSet:
    sentences: list[Candidate]
    context_tokens: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class SelectedSentence:
    ref: SentenceRef
    doc_id: str
    tokens: tuple[str, ...]
    relevance: float
    importance: float


@dataclass(frozen=True)
class InformativeContext:
    bag_id: str
    context_tokens: tuple[str, ...]
    selected: tuple[SelectedSentence, ...]

    @property
    def flattened_tokens(self) -> list[str]:
        out = list(self.context_tokens)
        for s in self.selected:
            out.extend(s.tokens)
        return out

    def digest(self) -> str:
        payload = {
            "bag_id": self.bag_id,
            "context": list(self.context_tokens),
            "sentences": [[list(s.ref), s.doc_id, list(s.tokens)] for s in self.selected],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def _sentence_entity_sets(path: TextPath):
    """[(role, idx, set of entities in sentence)] over both documents of a path."""
    out = []
    for role, idx, _ in path.sentences():
        out.append((role, idx, path.doc(role).sentence_entities(idx)))
    return out


def score_mentions(bag: Bag, cfg: FilterConfig) -> dict[str, dict[str, MentionScore]]:
    """Per text path, map each bridge entity to its MentionScore."""
    path_count = Counter()
    for p in bag.paths:
        path_count.update(p.mentioned_entities)

    out = {}
    ends = {bag.source, bag.target}
    for p in bag.paths:
        sents = [ents for _, _, ents in _sentence_entity_sets(p)]
        theta1 = {}
        for e in p.mentioned_entities:
            if cfg.theta1_mode == "both":
                theta1[e] = any(e in s and ends <= s for s in sents)
            else:
                theta1[e] = any(e in s and (s & ends) for s in sents)
        cooc: dict[str, set[str]] = {e: set() for e in p.mentioned_entities}
        for s in sents:
            bridges = s & p.mentioned_entities
            for e in bridges:
                cooc[e] |= bridges - {e}
        scores = {}
        for e in sorted(p.mentioned_entities):
            s1 = int(theta1[e])
            s2 = sum(1 for o in cooc[e] if theta1[o])
            s3 = path_count[e]
            total = cfg.lambda_w * s1 + cfg.eta_w * s2 + cfg.kappa_w * s3
            scores[e] = MentionScore(e, s1, s2, s3, total)
        out[p.path_id] = scores
    return out


def sentence_importance(bag: Bag, scores, cfg: FilterConfig) -> list[Candidate]:
    """Importance of every sentence in the bag, in (path, role, index) order."""
    out = []
    for p in bag.paths:
        pscores = scores.get(p.path_id, {})
        for role, idx, ents in _sentence_entity_sets(p):
            imp = 0.0
            if cfg.entity_filter:
                for e in sorted(ents & p.mentioned_entities):
                    imp += pscores[e].total
            out.append(Candidate(SentenceRef(p.path_id, role, idx), imp))
    return out


def rank_sentences(bag: Bag, scores, cfg: FilterConfig) -> CandidateSet:
    cands = sentence_importance(bag, scores, cfg)
    cands.sort(key=lambda c: (-c.importance, c.ref))
    return CandidateSet(cands[: cfg.top_k])


def tf_cosine(a, b) -> float:
    ca = Counter(t.lower() for t in a)
    cb = Counter(t.lower() for t in b)
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    if na == 0 or nb == 0:
        return 0.0
    dot = sum(v * cb[k] for k, v in ca.items() if k in cb)
    return dot / (na * nb)


def sentence_cost(bag: Bag, ref: SentenceRef) -> int:
    doc = bag.path(ref.path_id).doc(ref.role)
    return len(doc.sentences[ref.sentence_index]) + MARKER_COST * len(doc.mentions_in(ref.sentence_index))


def context_cost(tokens) -> int:
    return len(tokens) + MARKER_COST if tokens else 0


def target_sentences(bag: Bag) -> list[tuple[str, ...]]:
    out = []
    for p in bag.paths:
        for role, idx, toks in p.sentences():
            if bag.target in p.doc(role).sentence_entities(idx):
                out.append(toks)
    return out


def relevance_filter(cands: CandidateSet, context: Context | None, bag: Bag, cfg: FilterConfig) -> InformativeContext:
    """Pack the most informative sentences and the context tokens into the token budget.

    Budget accounting includes the marker tokens the encoder adds, so the
    marked sequence never has to drop anything the explanation shows.
    """
    ctx_tokens = list(context.tokens) if context is not None else []
    used = context_cost(ctx_tokens)
    if used > cfg.token_budget:
        raise ConfigError(f"context of {len(ctx_tokens)} tokens does not fit token_budget={cfg.token_budget}")

    targets = target_sentences(bag) if cfg.relevance_filter else []
    scored = []
    for c in cands.sentences:
        toks = bag.path(c.ref.path_id).doc(c.ref.role).sentences[c.ref.sentence_index]
        rel = max((tf_cosine(toks, t) for t in targets), default=0.0) if cfg.relevance_filter else 0.0
        scored.append((c, rel))
    # keep-all mode preserves candidate order (importance, then tie-break key)
    scored.sort(key=lambda x: (-x[1], -x[0].importance, x[0].ref))

    kept = []
    for c, rel in scored:
        if cfg.relevance_keep is not None and len(kept) >= cfg.relevance_keep:
            break
        cost = sentence_cost(bag, c.ref)
        if used + cost > cfg.token_budget:
            continue
        used += cost
        kept.append((c, rel))
    kept.sort(key=lambda x: x[0].ref)
    selected = []
    for c, rel in kept:
        doc = bag.path(c.ref.path_id).doc(c.ref.role)
        selected.append(SelectedSentence(c.ref, doc.doc_id, doc.sentences[c.ref.sentence_index], rel, c.importance))
    return InformativeContext(bag.bag_id, tuple(ctx_tokens), tuple(selected))


def filter_bag(bag: Bag, context: Context | None, cfg: FilterConfig):
    """Both filters in sequence; returns (mention scores, candidates, informative context)."""
    scores = score_mentions(bag, cfg)
    cands = rank_sentences(bag, scores, cfg)
    cands.context_tokens = list(context.tokens) if context is not None else []
    return scores, cands, relevance_filter(cands, context, bag, cfg)
