"""Open-setting evidence paths: pair documents mentioning the source with documents
mentioning the target, score each pair, keep the best ``top_k``.

Components per pair: entity count (source mentions in the source document plus
target mentions in the target document), number of shared entities, and TF-IDF
cosine of the two documents. Each component is min-max normalised over the
candidates and combined with non-negative weights.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass

from .corpus import Document, TextPath, make_bag
from .errors import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrievalConfig:
    top_k: int = 16
    w_count: float = 1.0
    w_shared: float = 1.0
    w_tfidf: float = 1.0

    def __post_init__(self):
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if min(self.w_count, self.w_shared, self.w_tfidf) < 0:
            raise ConfigError("retrieval weights must be >= 0")


@dataclass(frozen=True)
class PathScore:
    path: tuple[str, str]
    entity_count: int
    shared_entities: int
    tfidf_sim: float
    combined: float

    def to_dict(self):
        return {
            "source_doc": self.path[0],
            "target_doc": self.path[1],
            "entity_count": self.entity_count,
            "shared_entities": self.shared_entities,
            "tfidf_sim": self.tfidf_sim,
            "combined": self.combined,
        }


def _terms(doc: Document):
    return [t.lower() for s in doc.sentences for t in s]


class TfidfIndex:
    """Inverted index with natural-log IDF and L2-normalised TF-IDF document vectors."""

    def __init__(self, docs):
        self.docs = {d.doc_id: d for d in docs}
        self.n_docs = len(self.docs)
        self.postings: dict[str, list[str]] = defaultdict(list)
        tfs = {}
        for doc_id in sorted(self.docs):
            tf = Counter(_terms(self.docs[doc_id]))
            tfs[doc_id] = tf
            for term in tf:
                self.postings[term].append(doc_id)
        self.idf = {t: math.log(self.n_docs / len(ids)) for t, ids in self.postings.items()}
        self.vectors: dict[str, dict[str, float]] = {}
        for doc_id, tf in tfs.items():
            vec = {t: c * self.idf[t] for t, c in tf.items() if self.idf[t] > 0}
            norm = math.sqrt(sum(v * v for v in vec.values()))
            self.vectors[doc_id] = {t: v / norm for t, v in vec.items()} if norm > 0 else {}

    def similarity(self, a: str, b: str) -> float:
        """Cosine of two indexed documents; zero vectors give 0."""
        va, vb = self.vectors[a], self.vectors[b]
        if len(vb) < len(va):
            va, vb = vb, va
        return sum(w * vb[t] for t, w in va.items() if t in vb)


def build_index(docs) -> TfidfIndex:
    return TfidfIndex(docs)


def _minmax(values):
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def score_all_pairs(e_s, e_o, docs, cfg: RetrievalConfig, index: TfidfIndex | None = None) -> list[PathScore]:
    """Every candidate pair scored and ranked (no truncation)."""
    docs = list(docs)
    index = index or build_index(docs)
    src_docs = sorted((d for d in docs if e_s in d.entities), key=lambda d: d.doc_id)
    tgt_docs = sorted((d for d in docs if e_o in d.entities), key=lambda d: d.doc_id)
    raw = []
    for s in src_docs:
        for t in tgt_docs:
            if s.doc_id == t.doc_id:
                continue
            shared = len(s.entities & t.entities)
            if shared < 1:
                continue
            raw.append(((s.doc_id, t.doc_id), s.count(e_s) + t.count(e_o), shared, index.similarity(s.doc_id, t.doc_id)))
    if not raw:
        log.info("no candidate path between %s and %s", e_s, e_o)
        return []
    return combine(raw, cfg)


def combine(raw, cfg: RetrievalConfig) -> list[PathScore]:
    """Rank raw (path, entity_count, shared, tfidf) candidates by the weighted min-max combination."""
    if not raw:
        return []
    nc = _minmax([r[1] for r in raw])
    ns = _minmax([r[2] for r in raw])
    nt = _minmax([r[3] for r in raw])
    out = []
    for r, a, b, c in zip(raw, nc, ns, nt):
        combined = cfg.w_count * a + cfg.w_shared * b + cfg.w_tfidf * c
        out.append(PathScore(r[0], r[1], r[2], r[3], combined))
    out.sort(key=lambda p: (-p.combined, p.path))
    return out


def retrieve_paths(e_s, e_o, docs, cfg: RetrievalConfig, index: TfidfIndex | None = None) -> list[PathScore]:
    return score_all_pairs(e_s, e_o, docs, cfg, index)[: cfg.top_k]


def build_open_bag(bag_id, e_s, e_o, docs, cfg: RetrievalConfig, index=None, gold=(), vocab=None):
    """Bag assembled from retrieved paths, or None when nothing connects the pair (predicted NA)."""
    by_id = {d.doc_id: d for d in docs}
    ranked = retrieve_paths(e_s, e_o, docs, cfg, index)
    if not ranked:
        return None
    paths = [TextPath(f"{bag_id}:{i}", by_id[ps.path[0]], by_id[ps.path[1]]) for i, ps in enumerate(ranked)]
    return make_bag(bag_id, e_s, e_o, paths, gold, vocab)
