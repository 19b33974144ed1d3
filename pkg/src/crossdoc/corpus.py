"""Documents, mentions, cross-document text paths and bags.

A text path is a (source document, target document) pair. A bag groups all
text paths of one (source entity, target entity) pair; an empty gold set means NA.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError, VocabularyError

SOURCE, TARGET = "source", "target"


@dataclass(frozen=True)
class Mention:
    entity: str
    sentence_index: int
    token_start: int
    token_end: int

    def to_dict(self):
        return {
            "entity": self.entity,
            "sentence_index": self.sentence_index,
            "token_start": self.token_start,
            "token_end": self.token_end,
        }


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[tuple[str, ...], ...]
    mentions: tuple[Mention, ...] = ()

    def __post_init__(self):
        for m in self.mentions:
            if not 0 <= m.sentence_index < len(self.sentences):
                raise ValidationError(f"doc {self.doc_id}: mention of {m.entity} in missing sentence {m.sentence_index}")
            n = len(self.sentences[m.sentence_index])
            if not (0 <= m.token_start < m.token_end <= n):
                raise ValidationError(
                    f"doc {self.doc_id}: span [{m.token_start},{m.token_end}) of {m.entity} "
                    f"outside sentence {m.sentence_index} (length {n})"
                )

    @property
    def entities(self) -> set[str]:
        return {m.entity for m in self.mentions}

    def sentence_entities(self, idx: int) -> set[str]:
        return {m.entity for m in self.mentions if m.sentence_index == idx}

    def mentions_in(self, idx: int) -> list[Mention]:
        return [m for m in self.mentions if m.sentence_index == idx]

    def count(self, entity: str) -> int:
        return sum(1 for m in self.mentions if m.entity == entity)

    def to_dict(self):
        return {
            "doc_id": self.doc_id,
            "sentences": [list(s) for s in self.sentences],
            "mentions": [m.to_dict() for m in self.mentions],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                doc_id=str(d["doc_id"]),
                sentences=tuple(tuple(str(t) for t in s) for s in d["sentences"]),
                mentions=tuple(
                    Mention(str(m["entity"]), int(m["sentence_index"]), int(m["token_start"]), int(m["token_end"]))
                    for m in d.get("mentions", [])
                ),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed document record: {exc}") from exc


@dataclass(frozen=True)
class TextPath:
    path_id: str
    source_doc: Document
    target_doc: Document
    mentioned_entities: frozenset[str] = frozenset()

    def doc(self, role: str) -> Document:
        return self.source_doc if role == SOURCE else self.target_doc

    def sentences(self):
        """Yield (role, sentence_index, tokens) over both documents."""
        for role in (SOURCE, TARGET):
            for i, toks in enumerate(self.doc(role).sentences):
                yield role, i, toks


def bridge_entities(source_doc: Document, target_doc: Document, e_s: str, e_o: str) -> frozenset[str]:
    return frozenset((source_doc.entities | target_doc.entities) - {e_s, e_o})


@dataclass(frozen=True)
class Bag:
    bag_id: str
    source: str
    target: str
    paths: tuple[TextPath, ...]
    gold_relations: frozenset[str] = frozenset()

    @property
    def is_na(self) -> bool:
        return not self.gold_relations

    def path(self, path_id: str) -> TextPath:
        for p in self.paths:
            if p.path_id == path_id:
                return p
        raise KeyError(path_id)

    def to_dict(self):
        return {
            "bag_id": self.bag_id,
            "source": self.source,
            "target": self.target,
            "gold_relations": sorted(self.gold_relations),
            "paths": [
                {"path_id": p.path_id, "source_doc": p.source_doc.to_dict(), "target_doc": p.target_doc.to_dict()}
                for p in self.paths
            ],
        }


@dataclass(frozen=True)
class RelationVocabulary:
    labels: tuple[str, ...]
    index: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise VocabularyError("duplicate relation labels")
        if "NA" in self.labels:
            raise VocabularyError("'NA' is implicit (empty label set) and may not be declared")
        if any(not lab for lab in self.labels):
            raise VocabularyError("empty relation label")
        object.__setattr__(self, "index", {lab: i for i, lab in enumerate(self.labels)})

    def __len__(self):
        return len(self.labels)


def make_bag(bag_id, source, target, paths, gold=(), vocab: RelationVocabulary | None = None) -> Bag:
    """Validate and assemble a bag, deriving each path's bridge set."""
    if not paths:
        raise ValidationError(f"bag {bag_id}: no text paths")
    if source == target:
        raise ValidationError(f"bag {bag_id}: source equals target ({source})")
    gold = frozenset(gold)
    if vocab is not None:
        unknown = sorted(g for g in gold if g not in vocab.index)
        if unknown:
            raise VocabularyError(f"bag {bag_id}: unknown relation labels {unknown}")
    built = []
    seen = set()
    for p in paths:
        if p.path_id in seen:
            raise ValidationError(f"bag {bag_id}: duplicate path id {p.path_id}")
        seen.add(p.path_id)
        if source not in p.source_doc.entities:
            raise ValidationError(f"bag {bag_id}, doc {p.source_doc.doc_id}: source entity {source} not mentioned")
        if target not in p.target_doc.entities:
            raise ValidationError(f"bag {bag_id}, doc {p.target_doc.doc_id}: target entity {target} not mentioned")
        bridges = bridge_entities(p.source_doc, p.target_doc, source, target)
        built.append(TextPath(p.path_id, p.source_doc, p.target_doc, bridges))
    return Bag(bag_id, source, target, tuple(built), gold)


def bag_from_dict(d, vocab=None) -> Bag:
    bag_id = str(d.get("bag_id", "?"))
    try:
        paths = []
        for p in d["paths"]:
            try:
                src = Document.from_dict(p["source_doc"])
                tgt = Document.from_dict(p["target_doc"])
            except ValidationError as exc:
                raise ValidationError(f"bag {bag_id}: {exc}") from exc
            paths.append(TextPath(str(p["path_id"]), src, tgt))
        return make_bag(bag_id, str(d["source"]), str(d["target"]), paths, d.get("gold_relations", []), vocab)
    except KeyError as exc:
        raise ValidationError(f"bag {bag_id}: missing field {exc}") from exc


def load_vocab(path) -> RelationVocabulary:
    with open(path, encoding="utf-8") as fh:
        labels = [line.strip() for line in fh if line.strip()]
    return RelationVocabulary(tuple(labels))


def write_vocab(path, vocab: RelationVocabulary):
    Path(path).write_text("".join(f"{lab}\n" for lab in vocab.labels), encoding="utf-8")


def load_bags(corpus_path, vocab: RelationVocabulary) -> list[Bag]:
    bags = []
    seen = set()
    docs: dict[str, Document] = {}
    with open(corpus_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{corpus_path}:{line_no}: invalid JSON ({exc.msg})") from exc
            bag = bag_from_dict(rec, vocab)
            if bag.bag_id in seen:
                raise ValidationError(f"{corpus_path}:{line_no}: duplicate bag id {bag.bag_id}")
            seen.add(bag.bag_id)
            for p in bag.paths:
                for d in (p.source_doc, p.target_doc):
                    if docs.setdefault(d.doc_id, d) != d:
                        raise ValidationError(f"{corpus_path}:{line_no}: doc id {d.doc_id} reused with different content")
            bags.append(bag)
    return bags


def load_corpus(corpus_path, vocab_path) -> tuple[list[Bag], RelationVocabulary]:
    vocab = load_vocab(vocab_path)
    return load_bags(corpus_path, vocab), vocab


def dump_bags(bags, path):
    with open(path, "w", encoding="utf-8") as fh:
        for bag in bags:
            fh.write(json.dumps(bag.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_documents(path) -> list[Document]:
    """Plain document collection (one Document JSON per line) for open-setting retrieval."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                docs.append(Document.from_dict(json.loads(line)))
    return docs


def dump_documents(docs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def unique_documents(bags) -> list[Document]:
    out = {}
    for bag in bags:
        for p in bag.paths:
            for d in (p.source_doc, p.target_doc):
                out.setdefault(d.doc_id, d)
    return [out[k] for k in sorted(out)]
