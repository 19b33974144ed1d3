from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossdoc.classifier import BagScores
from crossdoc.context import ContextConfig, ContextGenerator
from crossdoc.corpus import Document, Mention, TextPath, make_bag
from crossdoc.errors import ProvenanceError, ValidationError
from crossdoc.explain import explain, render_sentence, RoleSpan
from crossdoc.filters import FilterConfig, InformativeContext, filter_bag

import oracles


def _scores_for(ictx, predicted=()):
    return BagScores(np.zeros((1, 1)), np.zeros(1), frozenset(predicted), ictx.digest())


def _explain_bag(bag, ctx=None, cfg=FilterConfig()):
    _, _, ictx = filter_bag(bag, ctx, cfg)
    return ictx, explain(bag, ictx, _scores_for(ictx))


def test_oichi_bag_tags_endpoints_and_bridges(fixture_corpus, kg):
    bags, _ = fixture_corpus
    bag = bags["oichi"]
    ctx = ContextGenerator(kg)(bag.source, bag.target, ContextConfig(5, "ecc"))
    ictx, exp = _explain_bag(bag, ctx)
    roles = {sp.entity: sp.role for s in exp.sentences for sp in s.spans}
    assert roles[bag.source] == "source" and roles[bag.target] == "target"
    for bridge in ("Q900101", "Q900102", "Q900103"):
        assert roles.get(bridge) == "bridge"
    text = " ".join(" ".join(s.tokens) for s in exp.sentences)
    assert "Oichi is the spouse of Azai Nagamasa" in text
    md = exp.to_markdown()
    assert "[Oichi]{.source}" in md and "{.bridge}" in md


def test_render_nested_and_adjacent_spans():
    toks = ("New", "York", "City", "hall")
    spans = [RoleSpan("bridge", "X", 0, 3), RoleSpan("source", "Y", 0, 2)]
    assert render_sentence(toks, spans) == "[[New York]{.source} City]{.bridge} hall"


def test_empty_informative_context():
    d1 = Document("a", (("S",),), (Mention("S", 0, 0, 1),))
    d2 = Document("b", (("O",),), (Mention("O", 0, 0, 1),))
    bag = make_bag("e", "S", "O", [TextPath("p", d1, d2)])
    ictx = InformativeContext("e", (), ())
    exp = explain(bag, ictx, _scores_for(ictx))
    assert exp.sentences == () and exp.tokens() == []
    assert "Evidence" not in exp.to_markdown()


def test_provenance_mismatch():
    bag = oracles.random_bag(3)
    ictx, _ = _explain_bag(bag)
    bad = BagScores(np.zeros((1, 1)), np.zeros(1), frozenset(), "0" * 64)
    with pytest.raises(ProvenanceError):
        explain(bag, ictx, bad)
    with pytest.raises(ProvenanceError):
        explain(oracles.random_bag(4), ictx, _scores_for(ictx))
    if ictx.selected:
        s0 = ictx.selected[0]
        forged = replace(ictx, selected=(replace(s0, tokens=s0.tokens + ("forged",)),) + ictx.selected[1:])
        with pytest.raises(ProvenanceError):
            explain(bag, forged, _scores_for(forged))


def test_crossing_mentions_rejected():
    d1 = Document("a", (("w", "x", "y", "z"),), (Mention("S", 0, 0, 2), Mention("B", 0, 1, 3)))
    d2 = Document("b", (("O", "B"),), (Mention("O", 0, 0, 1), Mention("B", 0, 1, 2)))
    bag = make_bag("c", "S", "O", [TextPath("p", d1, d2)])
    _, _, ictx = filter_bag(bag, None, FilterConfig())
    with pytest.raises(ValidationError):
        explain(bag, ictx, _scores_for(ictx))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_faithful_complete_deterministic(seed):
    bag = oracles.random_bag(seed)
    ictx, exp = _explain_bag(bag, cfg=FilterConfig(token_budget=120))
    body = Counter(exp.tokens())
    assert not body - Counter(ictx.flattened_tokens)
    got = [(s.path_id, s.role, s.sentence_index) for s in exp.sentences]
    assert got == [tuple(s.ref) for s in ictx.selected]
    again = explain(bag, ictx, _scores_for(ictx))
    assert again.to_markdown() == exp.to_markdown() and again.to_json() == exp.to_json()
