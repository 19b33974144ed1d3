"""Wikidata-style knowledge graph loaded from three TSV files.

``triples.tsv``  subject<TAB>property<TAB>object
``labels.tsv``   id<TAB>label        (entities and properties share one file)
``types.tsv``    entity<TAB>type

Lines starting with ``#`` and blank lines are skipped in all three files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .errors import IntegrityError, ParseError


class Triple(NamedTuple):
    subject: str
    property: str
    object: str


@dataclass(frozen=True)
class KnowledgeGraph:
    triples: frozenset[Triple]
    out_adjacency: dict[str, tuple[tuple[str, str], ...]]
    entity_labels: dict[str, str]
    property_labels: dict[str, str]
    entity_types: dict[str, str]
    undirected: bool = True

    @classmethod
    def from_triples(cls, triples, labels, types=None, undirected=True, check=True):
        """Build a graph from in-memory triples and a combined label map."""
        triples = frozenset(Triple(*t) for t in triples)
        labels = dict(labels)
        types = dict(types or {})
        used_props = {t.property for t in triples}
        if check:
            missing = set()
            for t in triples:
                for ident in t:
                    if ident not in labels:
                        missing.add(ident)
            if missing:
                raise IntegrityError("triples reference unlabeled ids", missing)
        property_labels = {p: labels[p] for p in sorted(used_props) if p in labels}
        entity_labels = {k: v for k, v in sorted(labels.items()) if k not in used_props}

        adj: dict[str, set[tuple[str, str]]] = {}
        for s, p, o in triples:
            adj.setdefault(s, set()).add((p, o))
            if undirected and s != o:
                adj.setdefault(o, set()).add((p, s))
        out_adjacency = {e: tuple(sorted(edges)) for e, edges in sorted(adj.items())}
        return cls(
            triples=triples,
            out_adjacency=out_adjacency,
            entity_labels=entity_labels,
            property_labels=property_labels,
            entity_types={k: types[k] for k in sorted(types)},
            undirected=undirected,
        )

    @property
    def entities(self) -> set[str]:
        ents = set(self.entity_labels)
        for s, _, o in self.triples:
            ents.add(s)
            ents.add(o)
        return ents

    def label(self, ident: str) -> str:
        if ident in self.property_labels:
            return self.property_labels[ident]
        return self.entity_labels.get(ident, ident)

    def has_entity(self, e: str) -> bool:
        return e in self.entity_labels or e in self.out_adjacency or e in self.entity_types

    def to_json(self) -> str:
        payload = {
            "undirected": self.undirected,
            "triples": sorted(list(t) for t in self.triples),
            "out_adjacency": {k: [list(x) for x in v] for k, v in self.out_adjacency.items()},
            "entity_labels": self.entity_labels,
            "property_labels": self.property_labels,
            "entity_types": self.entity_types,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=1)


def _read_tsv(path, n_fields):
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != n_fields:
                raise ParseError(path, line_no, f"expected {n_fields} tab-separated fields, got {len(parts)}")
            if any(not p.strip() for p in parts):
                raise ParseError(path, line_no, "empty field")
            rows.append(tuple(p.strip() for p in parts))
    return rows


def load_kg(triples_path, labels_path, types_path=None, undirected=True) -> KnowledgeGraph:
    triples = _read_tsv(triples_path, 3)
    labels = {}
    for ident, lab in _read_tsv(labels_path, 2):
        labels[ident] = lab
    types = {}
    if types_path is not None and Path(types_path).exists():
        for ident, typ in _read_tsv(types_path, 2):
            types[ident] = typ
    return KnowledgeGraph.from_triples(triples, labels, types, undirected=undirected)


def load_kg_dir(directory, undirected=True) -> KnowledgeGraph:
    d = Path(directory)
    return load_kg(d / "triples.tsv", d / "labels.tsv", d / "types.tsv", undirected=undirected)


def write_kg_dir(directory, triples, labels, types):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "triples.tsv", "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write("\t".join(t) + "\n")
    with open(d / "labels.tsv", "w", encoding="utf-8") as fh:
        for k, v in labels.items():
            fh.write(f"{k}\t{v}\n")
    with open(d / "types.tsv", "w", encoding="utf-8") as fh:
        for k, v in types.items():
            fh.write(f"{k}\t{v}\n")


def neighbors(g: KnowledgeGraph, e: str) -> tuple[tuple[str, str], ...]:
    return g.out_adjacency.get(e, ())


def get_entity_type(g: KnowledgeGraph, e: str) -> str | None:
    return g.entity_types.get(e)
