"""Ablation sweeps: filter toggles, hop limits and context modes, one trained model per cell."""

from __future__ import annotations

import csv
import logging
import statistics

from .config import RunConfig
from .context import MODES, ContextGenerator
from .errors import ConfigError
from .train import evaluate, prepare_corpus, train

log = logging.getLogger(__name__)

FILTER_SETTINGS = {
    "both": {"filter.entity_filter": True, "filter.relevance_filter": True},
    "no-relevance": {"filter.entity_filter": True, "filter.relevance_filter": False},
    "no-entity": {"filter.entity_filter": False, "filter.relevance_filter": True},
    "neither": {"filter.entity_filter": False, "filter.relevance_filter": False},
}

CSV_FIELDS = ("sweep", "setting", "seed", "f1", "auc", "accuracy")


def sweep_cells(sweep: str) -> list[tuple[str, dict]]:
    if sweep == "filters":
        return list(FILTER_SETTINGS.items())
    if sweep == "hops":
        return [(str(h), {"context.max_hops": h}) for h in range(1, 8)]
    if sweep == "modes":
        return [(m, {"context.mode": m}) for m in MODES]
    raise ConfigError(f"unknown sweep {sweep!r}; expected filters, hops or modes")


def run_cell(cfg: RunConfig, train_bags, dev_bags, kg, relations, seed: int, context_fn=None) -> dict:
    train_pb = prepare_corpus(train_bags, kg, cfg, relations, context_fn)
    dev_pb = prepare_corpus(dev_bags, kg, cfg, relations, context_fn)
    result = train(train_pb, cfg, relations, seed=seed)
    return evaluate(result.model, dev_pb)


def run_ablation(base: RunConfig, sweep: str, train_bags, dev_bags, kg, relations, seeds=None) -> list[dict]:
    """One row per (configuration, seed) with held-out F1, AUC and exact-match accuracy."""
    seeds = [base.seed] if seeds is None else list(seeds)
    context_fn = ContextGenerator(kg) if kg is not None else None
    rows = []
    for name, overrides in sweep_cells(sweep):
        cfg = base.replace(**overrides)
        for seed in seeds:
            m = run_cell(cfg.replace(seed=seed), train_bags, dev_bags, kg, relations, seed, context_fn)
            rows.append({"sweep": sweep, "setting": name, "seed": seed,
                         "f1": m["f1"], "auc": m["auc"], "accuracy": m["accuracy"]})
            log.info("%s=%s seed %d f1 %.4f acc %.4f", sweep, name, seed, m["f1"], m["accuracy"])
    return rows


def summarize(rows, metric="f1") -> dict[str, float]:
    """Median of ``metric`` over seeds, per setting, in first-seen order."""
    by = {}
    for r in rows:
        by.setdefault(r["setting"], []).append(r[metric])
    return {k: statistics.median(v) for k, v in by.items()}


def write_csv(rows, path_or_fh):
    own = isinstance(path_or_fh, str) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="", encoding="utf-8") if own else path_or_fh
    try:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in CSV_FIELDS})
    finally:
        if own:
            fh.close()
