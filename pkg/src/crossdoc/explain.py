"""Extractive explanations: the filtered model input, re-rendered with entity roles.

Nothing is generated. Every rendered sentence is a sentence of the informative
context the model consumed; spans are tagged ``source``, ``target``, ``bridge``
or ``context``. Markdown uses bracketed spans (``[Oichi]{.source}``), JSON keeps
tokens and span offsets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .classifier import BagScores
from .corpus import Bag
from .errors import ProvenanceError, ValidationError
from .filters import InformativeContext

ROLES = ("source", "target", "bridge", "context")


@dataclass(frozen=True)
class RoleSpan:
    role: str
    entity: str
    start: int
    end: int


@dataclass(frozen=True)
class ExplainedSentence:
    path_id: str
    doc_id: str
    role: str  # which document of the path: source or target side
    sentence_index: int
    tokens: tuple[str, ...]
    spans: tuple[RoleSpan, ...]
    text: str


@dataclass(frozen=True)
class Explanation:
    bag_id: str
    source: str
    target: str
    predicted: tuple[str, ...]
    context_tokens: tuple[str, ...]
    sentences: tuple[ExplainedSentence, ...] = field(default_factory=tuple)

    @property
    def context_block(self) -> str:
        if not self.context_tokens:
            return ""
        return "[" + " ".join(self.context_tokens) + "]{.context}"

    def tokens(self) -> list[str]:
        """Content tokens of the explanation body, without markup."""
        out = list(self.context_tokens)
        for s in self.sentences:
            out.extend(s.tokens)
        return out

    def to_markdown(self) -> str:
        lines = [f"## {self.bag_id}", ""]
        lines.append(f"- source: `{self.source}`")
        lines.append(f"- target: `{self.target}`")
        lines.append(f"- predicted: {', '.join(self.predicted) if self.predicted else 'NA'}")
        lines.append("")
        if self.context_tokens:
            lines += ["### Context", "", self.context_block, ""]
        if self.sentences:
            lines += ["### Evidence", ""]
            for s in self.sentences:
                lines.append(f"{s.text} <!-- {s.path_id} {s.doc_id} #{s.sentence_index} -->")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "bag_id": self.bag_id,
            "source": self.source,
            "target": self.target,
            "predicted": list(self.predicted),
            "context": list(self.context_tokens),
            "sentences": [
                {
                    "provenance": {"path_id": s.path_id, "doc_id": s.doc_id, "sentence_index": s.sentence_index},
                    "side": s.role,
                    "tokens": list(s.tokens),
                    "spans": [{"role": sp.role, "entity": sp.entity, "start": sp.start, "end": sp.end} for sp in s.spans],
                    "text": s.text,
                }
                for s in self.sentences
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, ensure_ascii=False)


def entity_role(bag: Bag, entity: str) -> str:
    if entity == bag.source:
        return "source"
    if entity == bag.target:
        return "target"
    return "bridge"


def render_sentence(tokens, spans) -> str:
    """Detokenise with ``[...]{.role}`` around spans; nested spans open outer-first."""
    order = sorted(range(len(spans)), key=lambda j: (spans[j].start, -spans[j].end, spans[j].entity))
    opens: dict[int, list[int]] = {}
    closes: dict[int, list[int]] = {}
    for j in order:
        opens.setdefault(spans[j].start, []).append(j)
        closes.setdefault(spans[j].end, []).append(j)
    pieces = []
    for pos, tok in enumerate(tokens):
        prefix = "[" * len(opens.get(pos, []))
        suffix = "".join(f"]{{.{spans[j].role}}}" for j in reversed(closes.get(pos + 1, [])))
        pieces.append(prefix + tok + suffix)
    return " ".join(pieces)


def explain(bag: Bag, ictx: InformativeContext, scores: BagScores) -> Explanation:
    if ictx.bag_id != bag.bag_id:
        raise ProvenanceError(f"informative context belongs to {ictx.bag_id}, not {bag.bag_id}")
    if scores.input_digest != ictx.digest():
        raise ProvenanceError(f"bag {bag.bag_id}: scores were not produced from this informative context")
    sentences = []
    for sel in ictx.selected:
        doc = bag.path(sel.ref.path_id).doc(sel.ref.role)
        if doc.doc_id != sel.doc_id or doc.sentences[sel.ref.sentence_index] != sel.tokens:
            raise ProvenanceError(f"bag {bag.bag_id}: sentence {tuple(sel.ref)} does not match its document")
        spans = sorted(
            {RoleSpan(entity_role(bag, m.entity), m.entity, m.token_start, m.token_end)
             for m in doc.mentions_in(sel.ref.sentence_index)},
            key=lambda s: (s.start, -s.end, s.entity),
        )
        for i, a in enumerate(spans):
            for b in spans[i + 1 :]:
                if b.start < a.end < b.end:
                    raise ValidationError(f"doc {doc.doc_id}: crossing mentions {a.entity} and {b.entity}")
        sentences.append(ExplainedSentence(
            sel.ref.path_id, sel.doc_id, sel.ref.role, sel.ref.sentence_index,
            tuple(sel.tokens), tuple(spans), render_sentence(sel.tokens, spans),
        ))
    return Explanation(
        bag.bag_id, bag.source, bag.target, tuple(sorted(scores.predicted)),
        tuple(ictx.context_tokens), tuple(sentences),
    )
