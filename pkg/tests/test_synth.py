import pytest
from hypothesis import given, settings, strategies as st

from crossdoc.context import ContextConfig, context_generation
from crossdoc.errors import ConfigError
from crossdoc.synth import SynthConfig, relation_cue, relation_property_label, synthesize_corpus


def _dump(corpus):
    return {k: [b.to_dict() for b in v] for k, v in corpus.splits.items()}, corpus.triples, corpus.manifest


def test_deterministic_per_seed():
    a = synthesize_corpus(SynthConfig(n_bags=10, n_dev_bags=3), seed=4)
    b = synthesize_corpus(SynthConfig(n_bags=10, n_dev_bags=3), seed=4)
    c = synthesize_corpus(SynthConfig(n_bags=10, n_dev_bags=3), seed=5)
    assert _dump(a) == _dump(b)
    assert _dump(a) != _dump(c)


def test_zero_bags():
    c = synthesize_corpus(SynthConfig(n_bags=0), seed=1)
    assert c.splits == {"train": []}
    assert c.manifest["splits"]["train"]["n_bags"] == 0


def test_invalid_config():
    with pytest.raises(ConfigError):
        SynthConfig(na_fraction=1.5)
    with pytest.raises(ConfigError):
        SynthConfig(sentences_per_doc=2)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_planted_signal_is_where_the_manifest_says(seed):
    corpus = synthesize_corpus(SynthConfig(n_bags=12, signal_strength=0.7), seed=seed)
    kg = corpus.kg
    for bag in corpus.splits["train"]:
        info = corpus.manifest["bags"][bag.bag_id]
        tokens = {t for p in bag.paths for _, _, s in p.sentences() for t in s}
        ctx = context_generation(kg, bag.source, bag.target, ContextConfig(5, "cc")).tokens
        for r in range(5):
            planted_text = info["text_pattern"] and info["relation"] == f"rel{r}"
            assert (relation_cue(r) in tokens) == planted_text
            planted_ctx = info["context_pattern"] and info["relation"] == f"rel{r}"
            assert (relation_property_label(r) in ctx) == planted_ctx


def test_signal_switches():
    c = synthesize_corpus(SynthConfig(n_bags=20, text_signal=False), seed=2)
    assert not any(v["text_pattern"] for v in c.manifest["bags"].values())
    c = synthesize_corpus(SynthConfig(n_bags=20, context_signal=False), seed=2)
    assert not c.triples


def test_distractors_precede_core_sentences():
    c = synthesize_corpus(SynthConfig(n_bags=3, distractor_sentences=5), seed=3)
    for bag in c.splits["train"]:
        for p in bag.paths:
            assert len(p.source_doc.sentences) == 5 + 4
            assert bag.source in p.source_doc.sentence_entities(5)
            assert not any(bag.source in p.source_doc.sentence_entities(i) for i in range(5))
