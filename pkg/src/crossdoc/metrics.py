"""Micro F1 over relation decisions and step-integrated precision-recall AUC."""

from __future__ import annotations

from itertools import groupby

from .errors import ValidationError


def confusion(predictions, gold):
    if len(predictions) != len(gold):
        raise ValidationError(f"{len(predictions)} predictions for {len(gold)} gold bags")
    tp = fp = fn = 0
    for p, g in zip(predictions, gold):
        p, g = set(p), set(g)
        tp += len(p & g)
        fp += len(p - g)
        fn += len(g - p)
    return tp, fp, fn


def compute_f1(predictions, gold) -> float:
    tp, fp, fn = confusion(predictions, gold)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def compute_auc(scored) -> float:
    """Area under the precision-recall curve over (score, is_positive) pairs.

    Scores are swept from high to low; tied scores enter as one group. The
    area is the sum of precision times the recall gained at each group.
    """
    scored = [(float(s), bool(y)) for s, y in scored]
    n_pos = sum(y for _, y in scored)
    if n_pos == 0 or n_pos == len(scored):
        raise ValidationError("PR-AUC needs at least one positive and one negative instance")
    scored.sort(key=lambda x: -x[0])
    tp = seen = 0
    area = 0.0
    for _, group in groupby(scored, key=lambda x: x[0]):
        group = list(group)
        gained = sum(y for _, y in group)
        tp += gained
        seen += len(group)
        area += (tp / seen) * (gained / n_pos)
    return area


def per_relation_f1(predictions, gold, labels) -> dict[str, float]:
    out = {}
    for lab in labels:
        out[lab] = compute_f1(
            [{lab} & set(p) for p in predictions],
            [{lab} & set(g) for g in gold],
        )
    return out
