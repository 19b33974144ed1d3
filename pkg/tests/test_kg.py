import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from crossdoc.errors import IntegrityError, ParseError
from crossdoc.kg import KnowledgeGraph, get_entity_type, load_kg, load_kg_dir, neighbors, write_kg_dir

import oracles


def test_fixture_chain_and_first_hop(kg):
    chain = [("Q6196505", "P31", "Q5"), ("Q5", "P5869", "Q42"), ("Q42", "P27", "Q145"),
             ("Q145", "P1365", "Q174193"), ("Q174193", "P156", "Q1140152")]
    for t in chain:
        assert tuple(t) in {tuple(x) for x in kg.triples}
    assert neighbors(kg, "Q6196505") == (("P31", "Q5"),)
    assert kg.label("P31") == "instance of"
    assert kg.label("Q5") == "Human"


def test_entity_types(kg):
    assert get_entity_type(kg, "Q6196505") == "Person"
    assert get_entity_type(kg, "Q1140152") == "GeoPoliticalEntity"
    assert get_entity_type(kg, "Q42") is None


def test_undirected_materialises_reverse_edges(kg):
    assert ("P156", "Q174193") in neighbors(kg, "Q1140152")


def test_directed_keeps_only_forward_edges():
    g = KnowledgeGraph.from_triples([("A", "P", "B")], {"A": "a", "B": "b", "P": "p"}, undirected=False)
    assert neighbors(g, "A") == (("P", "B"),)
    assert neighbors(g, "B") == ()


def test_self_loop_not_duplicated():
    g = KnowledgeGraph.from_triples([("A", "P", "A")], {"A": "a", "P": "p"})
    assert neighbors(g, "A") == (("P", "A"),)


def test_isolated_labeled_node_has_no_neighbors(kg):
    assert kg.has_entity("Q2")
    assert neighbors(kg, "Q2") == ()


def test_unlabeled_ids_raise_integrity_error():
    with pytest.raises(IntegrityError) as exc:
        KnowledgeGraph.from_triples([("A", "P", "B")], {"A": "a", "P": "p"})
    assert exc.value.offenders == ["B"]


def test_parse_error_reports_line(tmp_path):
    (tmp_path / "triples.tsv").write_text("# header\nA\tP\tB\nA\tP\n", encoding="utf-8")
    (tmp_path / "labels.tsv").write_text("A\ta\nB\tb\nP\tp\n", encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        load_kg_dir(tmp_path)
    assert exc.value.line_no == 3
    assert "triples.tsv:3" in str(exc.value)


def test_empty_field_is_parse_error(tmp_path):
    (tmp_path / "t.tsv").write_text("A\t\tB\n", encoding="utf-8")
    (tmp_path / "l.tsv").write_text("A\ta\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_kg(tmp_path / "t.tsv", tmp_path / "l.tsv")


def test_write_then_load_round_trip(tmp_path):
    triples, labels, _ = oracles.random_graph(3)
    g1 = KnowledgeGraph.from_triples(triples, labels)
    write_kg_dir(tmp_path, triples, labels, {})
    g2 = load_kg_dir(tmp_path)
    assert g1 == g2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_adjacency_is_bijective_with_triples(seed):
    triples, labels, _ = oracles.random_graph(seed, max_nodes=15, max_edges=40)
    g = KnowledgeGraph.from_triples(triples, labels)
    expected = oracles.undirected_adjacency(triples)
    assert {k: set(v) for k, v in g.out_adjacency.items()} == expected
    for k, v in g.out_adjacency.items():
        assert list(v) == sorted(set(v))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_loading_is_order_independent(seed):
    triples, labels, _ = oracles.random_graph(seed, max_nodes=12, max_edges=30)
    shuffled = list(triples)
    random.Random(seed).shuffle(shuffled)
    a = KnowledgeGraph.from_triples(triples, labels)
    b = KnowledgeGraph.from_triples(shuffled, labels)
    assert a.to_json() == b.to_json()
    json.loads(a.to_json())
