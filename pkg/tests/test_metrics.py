import random

import pytest
from hypothesis import given, settings, strategies as st

from crossdoc.errors import ValidationError
from crossdoc.metrics import compute_auc, compute_f1, confusion, per_relation_f1

import oracles


def test_hand_counted_fixture():
    preds = [{"a", "b"}, {"a"}, {"c", "d"}, set()]
    gold = [{"a", "b"}, {"a", "e"}, {"c"}, {"f"}]
    assert confusion(preds, gold) == (4, 1, 2)
    # TP=3, FP=1, FN=2
    preds = [{"a", "b", "c", "x"}, set()]
    gold = [{"a", "b", "c"}, {"d", "e"}]
    assert confusion(preds, gold) == (3, 1, 2)
    assert compute_f1(preds, gold) == pytest.approx(2 * 0.75 * 0.6 / 1.35, abs=1e-12)
    assert compute_f1(preds, gold) == pytest.approx(0.6666666666666666, abs=1e-12)


def test_perfect_and_all_na():
    gold = [{"a"}, set(), {"b", "c"}]
    assert compute_f1(gold, gold) == 1.0
    assert compute_f1([set(), set(), set()], gold) == 0.0


def test_na_bag_predicted_positive_is_false_positive():
    assert confusion([{"a"}], [set()]) == (0, 1, 0)


def test_length_mismatch():
    with pytest.raises(ValidationError):
        compute_f1([set()], [])


def test_auc_edge_cases():
    assert compute_auc([(0.9, True), (0.8, True), (0.1, False)]) == 1.0
    assert compute_auc([(0.5, True), (0.5, False), (0.5, False), (0.5, True)]) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        compute_auc([(0.1, True), (0.2, True)])
    with pytest.raises(ValidationError):
        compute_auc([])


def _random_fixture(seed):
    rng = random.Random(seed)
    labels = ["a", "b", "c", "d"]
    n = rng.randint(1, 20)
    preds = [set(rng.sample(labels, rng.randint(0, 3))) for _ in range(n)]
    gold = [set(rng.sample(labels, rng.randint(0, 2))) for _ in range(n)]
    scored = [(round(rng.uniform(-2, 2), rng.choice([1, 3])), rng.random() < 0.4) for _ in range(rng.randint(2, 60))]
    scored.append((0.0, True))
    scored.append((0.0, False))
    return preds, gold, scored


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_against_slow_oracles(seed):
    preds, gold, scored = _random_fixture(seed)
    assert abs(compute_f1(preds, gold) - oracles.slow_f1(preds, gold)) <= 1e-12
    assert abs(compute_auc(scored) - oracles.slow_pr_auc(scored)) <= 1e-9


def test_per_relation():
    preds = [{"a"}, {"b"}]
    gold = [{"a"}, {"a"}]
    out = per_relation_f1(preds, gold, ["a", "b"])
    assert out["a"] == pytest.approx(2 / 3)
    assert out["b"] == 0.0
