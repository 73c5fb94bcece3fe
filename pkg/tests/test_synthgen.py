import json

import pytest

from punerboot.gazetteer import load_seed
from punerboot.synthgen import SynthError, SynthSpec, generate, seed_gazetteer, vocabulary_coverage, write_synth


def test_zero_rate_is_all_outside():
    c = generate(SynthSpec(entity_rate=0.0, documents=20))
    assert all(t.type is None for ta in c.gold for t in ta.flat_tags())
    assert c.entity_prior == 0.0


def test_same_seed_same_corpus():
    a = generate(SynthSpec(seed=4, documents=30))
    b = generate(SynthSpec(seed=4, documents=30))
    assert a.documents == b.documents
    assert [x.tags for x in a.gold] == [x.tags for x in b.gold]
    c = generate(SynthSpec(seed=5, documents=30))
    assert a.documents != c.documents


def test_splits_share_vocabulary_but_not_text():
    a = generate(SynthSpec(seed=2, documents=30))
    b = generate(SynthSpec(seed=2, documents=30, split="test"))
    assert a.vocabulary == b.vocabulary
    assert a.documents[0].surfaces() != b.documents[0].surfaces()


@pytest.mark.parametrize("rate", [0.05, 0.15, 0.3])
def test_realized_prior_near_target(rate):
    c = generate(SynthSpec(entity_rate=rate, documents=300, vocab_sizes={"Component": 30, "Brand": 20}))
    assert c.n_tokens >= 10_000
    assert abs(c.entity_prior - rate) <= 0.1 * rate


def test_gold_spans_are_compound_linked():
    c = generate(SynthSpec(documents=20, compound_rate=1.0))
    for doc, ta in zip(c.documents, c.gold):
        for sent, tags in zip(doc.sentences, ta.tags):
            for tok, tag in zip(sent.tokens, tags):
                if tag.type is not None and tok.deprel == "compound":
                    assert tags[tok.head].type == tag.type


def test_infeasible_specs_raise():
    with pytest.raises(SynthError, match="infeasible"):
        generate(SynthSpec(entity_rate=0.9))
    with pytest.raises(SynthError):
        generate(SynthSpec(vocab_sizes={}, entity_rate=0.1))
    with pytest.raises(SynthError):
        generate(SynthSpec(sentence_length=(2, 3)))


def test_seed_dictionary_coverage():
    c = generate(SynthSpec(documents=5, vocab_sizes={"Component": 10, "Brand": 7}))
    assert vocabulary_coverage(seed_gazetteer(c, 1.0), c.vocabulary) == 1.0
    half = seed_gazetteer(c, 0.5)
    assert half.counts() == {"Component": 5, "Brand": 4}


def test_write_synth_files(tmp_path):
    meta = write_synth(tmp_path, SynthSpec(documents=10, seed=3), coverage=0.5, test_documents=4)
    for name in ("train.conllu", "test.conllu", "train.gold.jsonl", "test.gold.jsonl", "vocab.jsonl",
                 "seed.jsonl", "meta.json"):
        assert (tmp_path / name).exists()
    assert json.loads((tmp_path / "meta.json").read_text())["test_tokens"] == meta["test_tokens"]
    assert load_seed(tmp_path / "seed.jsonl", ["Component"]).counts() == {"Component": 20}
