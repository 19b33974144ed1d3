"""Entity-type (EC), connecting-path (CC) and combined (ECC) context for an entity pair."""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field

from .errors import ConfigError
from .kg import KnowledgeGraph, get_entity_type, neighbors

MODES = ("none", "ec", "cc", "ecc")

Hop = tuple[str, str]  # (property id, entity id reached)


@dataclass(frozen=True)
class ContextConfig:
    max_hops: int = 5
    mode: str = "ecc"

    def __post_init__(self):
        if self.max_hops < 1:
            raise ConfigError(f"max_hops must be >= 1, got {self.max_hops}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown context mode {self.mode!r}; expected one of {MODES}")


@dataclass(frozen=True)
class Context:
    pair: tuple[str, str]
    ec_tokens: tuple[str, ...] = ()
    cc_tokens: tuple[str, ...] = ()
    mode: str = "ecc"
    path: tuple[Hop, ...] | None = None

    @property
    def tokens(self) -> list[str]:
        """ECC rendering is EC tokens followed by CC tokens."""
        return list(self.ec_tokens) + list(self.cc_tokens)


def explore_path(g: KnowledgeGraph, source: str, target: str, max_hops: int) -> tuple[Hop, ...] | None:
    """Shortest path of at most ``max_hops`` edges, or None.

    Among equally short paths the lexicographically smallest sequence of
    (property id, entity id) hops wins. Works layer by layer: every node keeps
    the smallest path that reaches it at its BFS depth, which is enough because
    all candidate prefixes at one depth have equal length.
    """
    if max_hops < 1:
        raise ConfigError("max_hops must be >= 1")
    if source == target:
        return ()
    best: dict[str, tuple[Hop, ...]] = {source: ()}
    frontier = {source: ()}
    for _ in range(max_hops):
        nxt: dict[str, tuple[Hop, ...]] = {}
        for node, prefix in frontier.items():
            for prop, other in neighbors(g, node):
                if other in best:
                    continue
                cand = prefix + ((prop, other),)
                cur = nxt.get(other)
                if cur is None or cand < cur:
                    nxt[other] = cand
        if not nxt:
            return None
        if target in nxt:
            return nxt[target]
        best.update(nxt)
        frontier = nxt
    return None


def explore_entity_type(g: KnowledgeGraph, source: str, target: str) -> list[str]:
    out = []
    for e in (source, target):
        t = get_entity_type(g, e)
        if t is not None:
            out.append(t)
    return out


def render_path(g: KnowledgeGraph, path) -> list[str]:
    """[label(p1), label(v1), ..., label(p_k)]; the final hop's entity is the target and is dropped."""
    tokens = []
    for i, (prop, ent) in enumerate(path):
        tokens.append(g.label(prop))
        if i < len(path) - 1:
            tokens.append(g.label(ent))
    return tokens


def context_generation(g: KnowledgeGraph, source: str, target: str, cfg: ContextConfig, diagnostics=None) -> Context:
    pair = (source, target)
    if cfg.mode == "none":
        return Context(pair, mode="none")
    if not (g.has_entity(source) and g.has_entity(target)):
        if diagnostics is not None:
            diagnostics["unknown_entity"] += 1
        return Context(pair, mode=cfg.mode)
    ec: list[str] = []
    cc: list[str] = []
    path = None
    if cfg.mode in ("ec", "ecc"):
        ec = explore_entity_type(g, source, target)
    if cfg.mode in ("cc", "ecc"):
        path = explore_path(g, source, target, cfg.max_hops)
        if path:
            cc = render_path(g, path)
        elif diagnostics is not None:
            diagnostics["no_path"] += 1
    return Context(pair, tuple(ec), tuple(cc), cfg.mode, path)


@dataclass
class ContextGenerator:
    """Caches contexts per (source, target, max_hops, mode) over one immutable graph."""

    graph: KnowledgeGraph
    diagnostics: Counter = field(default_factory=Counter)
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __call__(self, source: str, target: str, cfg: ContextConfig) -> Context:
        key = (source, target, cfg.max_hops, cfg.mode)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            self.diagnostics["cache_hit"] += 1
            return hit
        ctx = context_generation(self.graph, source, target, cfg, self.diagnostics)
        with self._lock:
            self._cache.setdefault(key, ctx)
        return ctx
