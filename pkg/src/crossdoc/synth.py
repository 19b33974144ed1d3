"""Synthetic bags with planted relation signal, plus a matching knowledge graph.

A positive bag's relation can be planted in two places:

* text: the sentences where a bridge entity co-occurs with the source (or the
  target) carry a relation-specific cue token;
* context: the KG holds a two-hop path source -[relation property]-> hub
  -[linked to]-> target; the property and the hub node are relation-specific.

``signal_strength`` is the probability that a positive bag receives its
pattern(s). NA bags get neutral cue tokens and, half of the time, a neutral KG
path, so the mere presence of a path does not reveal the label.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import Document, Mention, RelationVocabulary, TextPath, dump_bags, dump_documents, make_bag, unique_documents, write_vocab
from .errors import ConfigError
from .kg import KnowledgeGraph, write_kg_dir

ENTITY_TYPES = ("Person", "ORG", "GeoPoliticalEntity", "Work")
LINK_PROP, NEUTRAL_PROP = "P9001", "P9002"


@dataclass(frozen=True)
class SynthConfig:
    n_bags: int = 50
    n_dev_bags: int = 0
    n_relations: int = 5
    na_fraction: float = 0.3
    min_paths: int = 1
    max_paths: int = 3
    sentences_per_doc: int = 4
    distractor_sentences: int = 0
    min_sentence_len: int = 5
    max_sentence_len: int = 9
    filler_vocab: int = 300
    bridge_pool: int = 40
    surface_pool: int = 20
    signal_strength: float = 1.0
    text_signal: bool = True
    context_signal: bool = True

    def __post_init__(self):
        if self.n_bags < 0 or self.n_dev_bags < 0:
            raise ConfigError("bag counts must be >= 0")
        if not 0.0 <= self.na_fraction <= 1.0 or not 0.0 <= self.signal_strength <= 1.0:
            raise ConfigError("na_fraction and signal_strength must lie in [0, 1]")
        if self.n_relations < 0:
            raise ConfigError("n_relations must be >= 0")
        if self.n_relations == 0 and self.na_fraction < 1.0 and self.n_bags + self.n_dev_bags > 0:
            raise ConfigError("positive bags requested but n_relations == 0")
        if not 1 <= self.min_paths <= self.max_paths:
            raise ConfigError("need 1 <= min_paths <= max_paths")
        if self.sentences_per_doc < 3:
            raise ConfigError("sentences_per_doc must be >= 3")
        if not 3 <= self.min_sentence_len <= self.max_sentence_len:
            raise ConfigError("need 3 <= min_sentence_len <= max_sentence_len")
        if self.surface_pool < 2:
            raise ConfigError("surface_pool must be >= 2")
        if self.bridge_pool < self.max_paths:
            raise ConfigError("bridge_pool must be >= max_paths")


@dataclass
class SyntheticCorpus:
    splits: dict[str, list]
    vocab: RelationVocabulary
    triples: list[tuple[str, str, str]]
    labels: dict[str, str]
    types: dict[str, str]
    manifest: dict = field(default_factory=dict)

    @property
    def kg(self) -> KnowledgeGraph:
        return KnowledgeGraph.from_triples(self.triples, self.labels, self.types)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for split, bags in self.splits.items():
            dump_bags(bags, out / f"{split}.jsonl")
        write_vocab(out / "relations.txt", self.vocab)
        write_kg_dir(out / "kg", self.triples, self.labels, self.types)
        all_bags = [b for bags in self.splits.values() for b in bags]
        dump_documents(unique_documents(all_bags), out / "docs.jsonl")
        (out / "manifest.json").write_text(json.dumps(self.manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def relation_cue(r: int) -> str:
    return f"cue{r}"


def relation_property(r: int) -> str:
    return f"P{8000 + r}"


def relation_property_label(r: int) -> str:
    return f"relprop{r}"


def relation_hub(r: int) -> str:
    """KG node shared by every planted path of relation ``r``."""
    return f"Q{690000 + r}"


class _Builder:
    def __init__(self, cfg: SynthConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng

    def filler(self, n):
        return [f"w{self.rng.randrange(self.cfg.filler_vocab)}" for _ in range(n)]

    def sentence(self, entities, extra=()):
        """Filler sentence with one-token mentions of ``entities`` and ``extra`` tokens at random slots."""
        cfg, rng = self.cfg, self.rng
        n = rng.randint(cfg.min_sentence_len, cfg.max_sentence_len)
        n = max(n, len(entities) + len(extra) + 1)
        toks = self.filler(n)
        slots = rng.sample(range(n), len(entities) + len(extra))
        mentions = []
        for (ent, surface), pos in zip(entities, slots[: len(entities)]):
            toks[pos] = surface
            mentions.append((ent, pos))
        for tok, pos in zip(extra, slots[len(entities):]):
            toks[pos] = tok
        return toks, mentions

    def document(self, doc_id, anchor, bridge, cue, noise_pool):
        """Distractors first, then: anchor alone, anchor+bridge(+cue), bridge alone, filler."""
        cfg, rng = self.cfg, self.rng
        plan = []
        for _ in range(cfg.distractor_sentences):
            ents = [rng.choice(noise_pool)] if rng.random() < 0.3 else []
            plan.append((ents, ()))
        core = [([anchor], ()), ([anchor, bridge], (cue,)), ([bridge], ())]
        core += [([], ()) for _ in range(cfg.sentences_per_doc - 3)]
        plan.extend(core)
        sentences, mentions = [], []
        for idx, (ents, extra) in enumerate(plan):
            toks, ms = self.sentence(ents, extra)
            sentences.append(tuple(toks))
            mentions.extend(Mention(ent, idx, pos, pos + 1) for ent, pos in ms)
        return Document(doc_id, tuple(sentences), tuple(mentions))


def synthesize_corpus(cfg: SynthConfig, seed: int, out_dir=None) -> SyntheticCorpus:
    rng = random.Random(seed)
    b = _Builder(cfg, rng)
    vocab = RelationVocabulary(tuple(f"rel{r}" for r in range(cfg.n_relations)))
    bridges = [(f"Q{500000 + k}", f"bridge{k}") for k in range(cfg.bridge_pool)]
    noise = [(f"Q{600000 + k}", f"noise{k}") for k in range(cfg.bridge_pool)]

    triples: list[tuple[str, str, str]] = []
    labels = {LINK_PROP: "linked to", NEUTRAL_PROP: "related to"}
    for r in range(cfg.n_relations):
        labels[relation_property(r)] = relation_property_label(r)
    types: dict[str, str] = {}
    splits: dict[str, list] = {}
    manifest_bags = {}
    counter = 0
    for split, n in (("train", cfg.n_bags), ("dev", cfg.n_dev_bags)):
        if split == "dev" and n == 0:
            continue
        bags = []
        for i in range(n):
            counter += 1
            bag_id = f"{split}-{i:04d}"
            e_s, e_o = f"Q{100000 + 2 * counter}", f"Q{100001 + 2 * counter}"
            # surfaces repeat across bags so that a name alone does not identify the bag
            s_name, o_name = rng.sample(range(cfg.surface_pool), 2)
            src, tgt = (e_s, f"ent{s_name}"), (e_o, f"ent{o_name}")
            is_na = rng.random() < cfg.na_fraction or cfg.n_relations == 0
            rel = None if is_na else rng.randrange(cfg.n_relations)
            planted = rel is not None and rng.random() < cfg.signal_strength
            text_pattern = planted and cfg.text_signal
            context_pattern = planted and cfg.context_signal
            cue = relation_cue(rel) if text_pattern else "cueNA"

            n_paths = rng.randint(cfg.min_paths, cfg.max_paths)
            paths = []
            for j, bridge in enumerate(rng.sample(bridges, n_paths)):
                sd = b.document(f"{bag_id}-p{j}-s", src, bridge, cue, noise)
                td = b.document(f"{bag_id}-p{j}-t", tgt, bridge, cue, noise)
                paths.append(TextPath(f"{bag_id}-p{j}", sd, td))
            gold = () if rel is None else (vocab.labels[rel],)
            bags.append(make_bag(bag_id, e_s, e_o, paths, gold, vocab))

            labels[e_s], labels[e_o] = src[1], tgt[1]
            types[e_s], types[e_o] = rng.choice(ENTITY_TYPES), rng.choice(ENTITY_TYPES)
            if context_pattern:
                hub = relation_hub(rel)
                labels[hub] = f"hub{rel}"
                triples += [(e_s, relation_property(rel), hub), (hub, LINK_PROP, e_o)]
            elif cfg.context_signal and rng.random() < 0.5:
                node = f"Q{700000 + counter}"
                labels[node] = f"node{counter}"
                triples += [(e_s, NEUTRAL_PROP, node), (node, LINK_PROP, e_o)]
            manifest_bags[bag_id] = {
                "split": split,
                "relation": None if rel is None else vocab.labels[rel],
                "text_pattern": text_pattern,
                "context_pattern": context_pattern,
                "n_paths": n_paths,
            }
        splits[split] = bags

    summary = {}
    for split, bags in splits.items():
        per_rel = {lab: 0 for lab in vocab.labels}
        for bag in bags:
            for lab in bag.gold_relations:
                per_rel[lab] += 1
        summary[split] = {
            "n_bags": len(bags),
            "n_positive": sum(1 for x in bags if not x.is_na),
            "n_na": sum(1 for x in bags if x.is_na),
            "per_relation": per_rel,
        }
    manifest = {"seed": seed, "config": asdict(cfg), "splits": summary, "bags": manifest_bags}
    corpus = SyntheticCorpus(splits, vocab, triples, labels, types, manifest)
    if out_dir is not None:
        corpus.write(out_dir)
    return corpus
