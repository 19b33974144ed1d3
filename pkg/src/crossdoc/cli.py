"""Command-line entry point.

Corpus directories follow the layout written by ``synth-corpus``: ``train.jsonl``,
``dev.jsonl``, ``relations.txt``, ``kg/`` and ``docs.jsonl``. Relative paths are
resolved against ``$CROSSDOC_DATA`` when that variable is set.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import ablation, retrieval
from .config import RunConfig, from_dict, load_config
from .context import MODES, ContextGenerator
from .corpus import Bag, load_bags, load_documents, load_vocab
from .errors import NumericalError, ValidationError
from .explain import explain
from .filters import filter_bag
from .kg import KnowledgeGraph, load_kg, load_kg_dir, write_kg_dir
from .model import Model, load_checkpoint, load_encoder_into, save_checkpoint, save_encoder
from .synth import SynthConfig, synthesize_corpus
from .train import evaluate, model_config, predict_all, prediction_rows, prepare_corpus, train

log = logging.getLogger("crossdoc")

DATA_ENV = "CROSSDOC_DATA"


def data_path(p) -> Path:
    path = Path(p)
    root = os.environ.get(DATA_ENV)
    if root and not path.is_absolute() and not path.exists():
        return Path(root) / path
    return path


def fixture_kg_dir() -> Path:
    return Path(str(resources.files("crossdoc") / "data" / "kg"))


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n")


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _run_config(args, extra=None) -> RunConfig:
    overrides = _overrides(args.set)
    overrides.update(extra or {})
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(data_path(args.config) if args.config else None, overrides)


def _kg_for(args, corpus_dir: Path | None = None) -> KnowledgeGraph:
    if getattr(args, "kg", None):
        return load_kg_dir(data_path(args.kg))
    if corpus_dir is not None and (corpus_dir / "kg").is_dir():
        return load_kg_dir(corpus_dir / "kg")
    return load_kg_dir(fixture_kg_dir())


def _load_split(corpus_dir: Path, split: str):
    vocab = load_vocab(corpus_dir / "relations.txt")
    path = corpus_dir / f"{split}.jsonl"
    if not path.exists():
        raise ValidationError(f"{corpus_dir}: no split {split!r}")
    return load_bags(path, vocab), vocab


def _open_bags(bags, cfg: RunConfig, vocab) -> list[Bag]:
    """Replace each bag's paths with retrieved ones; unconnected pairs are dropped and logged."""
    docs = load_documents(data_path(cfg.retrieval_corpus))
    index = retrieval.build_index(docs)
    out = []
    for b in bags:
        ob = retrieval.build_open_bag(b.bag_id, b.source, b.target, docs, cfg.retrieval, index, b.gold_relations, vocab)
        if ob is None:
            log.warning("bag %s: no retrieved path, predicted NA", b.bag_id)
        else:
            out.append(ob)
    return out


def _find_bag(bags, bag_id) -> Bag:
    for b in bags:
        if b.bag_id == bag_id:
            return b
    raise ValidationError(f"unknown bag id {bag_id!r}")


# -- subcommands -------------------------------------------------------------


def cmd_ingest_kg(args):
    g = load_kg(data_path(args.triples), data_path(args.labels), data_path(args.types) if args.types else None,
                undirected=not args.directed)
    if args.out:
        directed = sorted((t.subject, t.property, t.object) for t in g.triples)
        types = dict(g.entity_types)
        labels = {**g.entity_labels, **g.property_labels}
        write_kg_dir(data_path(args.out), directed, labels, types)
    _emit({"entities": len(g.entities), "triples": len(g.triples), "properties": len(g.property_labels)})


def cmd_synth_corpus(args):
    cfg = SynthConfig(
        n_bags=args.bags, n_dev_bags=args.dev_bags, n_relations=args.relations,
        distractor_sentences=args.distractors, signal_strength=args.signal,
        text_signal=not args.no_text_signal, context_signal=not args.no_context_signal,
    )
    seed = 7 if args.seed is None else args.seed
    corpus = synthesize_corpus(cfg, seed, data_path(args.out))
    _emit(corpus.manifest["splits"])


def cmd_context(args):
    extra = {}
    if args.hops is not None:
        extra["context.max_hops"] = args.hops
    if args.mode is not None:
        extra["context.mode"] = args.mode
    cfg = _run_config(args, extra)
    g = _kg_for(args)
    gen = ContextGenerator(g)
    ctx = gen(args.source, args.target, cfg.context)
    _emit({
        "source": args.source,
        "target": args.target,
        "mode": ctx.mode,
        "max_hops": cfg.context.max_hops,
        "tokens": ctx.tokens,
        "path": None if ctx.path is None else [list(h) for h in ctx.path],
        "diagnostics": dict(gen.diagnostics),
    })


def cmd_filter(args):
    corpus_dir = data_path(args.corpus)
    cfg = _run_config(args)
    bags, _ = _load_split(corpus_dir, args.split)
    bag = _find_bag(bags, args.bag_id)
    ctx = None
    if cfg.context.mode != "none":
        ctx = ContextGenerator(_kg_for(args, corpus_dir))(bag.source, bag.target, cfg.context)
    scores, cands, ictx = filter_bag(bag, ctx, cfg.filter)
    if args.dump_scores:
        with open(data_path(args.dump_scores), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "entity", "s1", "s2", "s3", "total"])
            for pid in sorted(scores):
                for e, ms in sorted(scores[pid].items()):
                    w.writerow([pid, e, ms.s1, ms.s2, ms.s3, repr(ms.total)])
    _emit({
        "bag_id": bag.bag_id,
        "digest": ictx.digest(),
        "context": list(ictx.context_tokens),
        "candidates": [[list(c.ref), c.importance] for c in cands.sentences],
        "selected": [
            {"ref": list(s.ref), "doc_id": s.doc_id, "tokens": list(s.tokens),
             "relevance": s.relevance, "importance": s.importance}
            for s in ictx.selected
        ],
    })


def cmd_retrieve(args):
    cfg = _run_config(args, {"retrieval.top_k": args.top_k} if args.top_k else None)
    src = data_path(args.corpus)
    docs = load_documents(src / "docs.jsonl" if src.is_dir() else src)
    ranked = retrieval.retrieve_paths(args.source, args.target, docs, cfg.retrieval)
    _emit([p.to_dict() for p in ranked])


def cmd_train(args):
    extra = {}
    if args.mode:
        extra["context.mode"] = args.mode
    if args.hops:
        extra["context.max_hops"] = args.hops
    if args.epochs is not None:
        extra["train.epochs"] = args.epochs
    if args.lr is not None:
        extra["train.learning_rate"] = args.lr
    if args.literal_loss:
        extra["train.literal_loss"] = True
    cfg = _run_config(args, extra)
    corpus_dir = data_path(args.corpus)
    bags, vocab = _load_split(corpus_dir, args.split)
    if cfg.setting == "open":
        bags = _open_bags(bags, cfg, vocab)
    kg = _kg_for(args, corpus_dir)
    prepared = prepare_corpus(bags, kg, cfg, vocab.labels)
    model = Model(model_config(cfg, vocab.labels), seed=cfg.seed)
    if args.load_encoder:
        load_encoder_into(data_path(args.load_encoder), model)
    log_fh = open(data_path(args.log), "w", encoding="utf-8") if args.log else sys.stderr
    try:
        result = train(prepared, cfg, vocab.labels, model=model, log_fh=log_fh)
    finally:
        if args.log:
            log_fh.close()
    if args.save:
        save_checkpoint(data_path(args.save), result.model, {"run_config": cfg.to_dict()})
    if args.save_encoder:
        save_encoder(data_path(args.save_encoder), result.model)
    _emit(result.log[-1] if result.log else {})


def _checkpoint_setup(args):
    model, extra = load_checkpoint(data_path(args.checkpoint))
    cfg = from_dict(extra["run_config"]) if "run_config" in extra else RunConfig()
    overrides = _overrides(args.set)
    if overrides:
        cfg = cfg.replace(**overrides)
    return model, cfg


def cmd_eval(args):
    model, cfg = _checkpoint_setup(args)
    corpus_dir = data_path(args.corpus)
    bags, vocab = _load_split(corpus_dir, args.split)
    if tuple(vocab.labels) != model.cfg.relations:
        raise ValidationError("corpus relation vocabulary differs from the checkpoint's")
    if cfg.setting == "open":
        bags = _open_bags(bags, cfg, vocab)
    prepared = prepare_corpus(bags, _kg_for(args, corpus_dir), cfg, vocab.labels)
    scores = predict_all(model, prepared)
    report = evaluate(model, prepared, scores)
    if not all(np.isfinite(s.pooled).all() for s in scores):
        raise NumericalError("non-finite scores during evaluation")
    if args.predictions:
        with open(data_path(args.predictions), "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["bag_id", "gold", "predicted", "scores"])
            w.writeheader()
            w.writerows(prediction_rows(prepared, scores, vocab.labels))
    if args.dump_matrix:
        out = data_path(args.dump_matrix)
        out.mkdir(parents=True, exist_ok=True)
        for pb in prepared:
            flat, final = model.relation_matrix(pb)
            np.save(out / f"{pb.bag.bag_id}.input.npy", flat)
            np.save(out / f"{pb.bag.bag_id}.final.npy", final)
            with open(out / f"{pb.bag.bag_id}.index.tsv", "w", encoding="utf-8") as fh:
                n = len(pb.entities)
                for u in range(n):
                    for v in range(n):
                        fh.write(f"{u * n + v}\t{pb.entities[u]}\t{pb.entities[v]}\n")
    _emit(report)


def cmd_explain(args):
    model, cfg = _checkpoint_setup(args)
    corpus_dir = data_path(args.corpus)
    bags, vocab = _load_split(corpus_dir, args.split)
    bag = _find_bag(bags, args.bag_id)
    pb = prepare_corpus([bag], _kg_for(args, corpus_dir), cfg, model.cfg.relations)[0]
    exp = explain(pb.bag, pb.ictx, model.forward(pb))
    sys.stdout.write(exp.to_markdown() if args.format == "md" else exp.to_json() + "\n")


def cmd_ablate(args):
    extra = {"train.epochs": args.epochs} if args.epochs is not None else {}
    cfg = _run_config(args, extra)
    corpus_dir = data_path(args.corpus)
    train_bags, vocab = _load_split(corpus_dir, "train")
    dev_bags, _ = _load_split(corpus_dir, args.split)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    rows = ablation.run_ablation(cfg, args.sweep, train_bags, dev_bags, _kg_for(args, corpus_dir), vocab.labels, seeds)
    if args.csv:
        ablation.write_csv(rows, data_path(args.csv))
    _emit(rows)


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted config override, repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="crossdoc", description="Knowledge-enhanced cross-document relation extraction")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest-kg", parents=[common], help="validate and normalise a TSV knowledge graph")
    s.add_argument("--triples", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--types")
    s.add_argument("--out")
    s.add_argument("--directed", action="store_true")
    s.set_defaults(func=cmd_ingest_kg)

    s = sub.add_parser("synth-corpus", parents=[common], help="write a synthetic corpus directory")
    s.add_argument("--out", required=True)
    s.add_argument("--bags", type=int, default=50)
    s.add_argument("--dev-bags", type=int, default=20)
    s.add_argument("--relations", type=int, default=5)
    s.add_argument("--distractors", type=int, default=0)
    s.add_argument("--signal", type=float, default=1.0)
    s.add_argument("--no-text-signal", action="store_true")
    s.add_argument("--no-context-signal", action="store_true")
    s.set_defaults(func=cmd_synth_corpus)

    s = sub.add_parser("context", parents=[common], help="knowledge-graph context for an entity pair")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--hops", type=int, help="default from config (5)")
    s.add_argument("--mode", choices=MODES, help="default from config (ecc)")
    s.add_argument("--kg", help="KG directory (default: shipped fixture)")
    s.set_defaults(func=cmd_context)

    s = sub.add_parser("filter", parents=[common], help="informative context of one bag")
    s.add_argument("--corpus", required=True)
    s.add_argument("--split", default="train")
    s.add_argument("--bag-id", required=True)
    s.add_argument("--kg")
    s.add_argument("--dump-scores", help="CSV of per-entity filter scores")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("retrieve", parents=[common], help="rank open-setting evidence paths")
    s.add_argument("--corpus", "--docs", dest="corpus", required=True,
                   help="documents JSONL, or a corpus directory holding docs.jsonl")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--top-k", type=int)
    s.set_defaults(func=cmd_retrieve)

    s = sub.add_parser("train", parents=[common], help="train a model")
    s.add_argument("--corpus", required=True)
    s.add_argument("--split", default="train")
    s.add_argument("--kg")
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--hops", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--literal-loss", action="store_true", help="use the loss exactly as printed (positives as e^+y)")
    s.add_argument("--save", help="checkpoint path (.npz)")
    s.add_argument("--log", help="JSONL training log (default: stderr)")
    s.add_argument("--load-encoder")
    s.add_argument("--save-encoder")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--split", default="dev")
    s.add_argument("--kg")
    s.add_argument("--predictions", help="per-bag predictions CSV")
    s.add_argument("--dump-matrix", help="directory for relation-matrix .npy dumps")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("explain", parents=[common], help="extractive explanation of one prediction")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--split", default="dev")
    s.add_argument("--kg")
    s.add_argument("--bag-id", required=True)
    s.add_argument("--format", choices=("md", "json"), default="md")
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("ablate", parents=[common], help="filter, hop or mode sweep")
    s.add_argument("--corpus", required=True)
    s.add_argument("--split", default="dev")
    s.add_argument("--kg")
    s.add_argument("--sweep", choices=("filters", "hops", "modes"), required=True)
    s.add_argument("--seeds", help="comma-separated seeds (default: --seed)")
    s.add_argument("--epochs", type=int)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
