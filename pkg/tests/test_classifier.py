import io
import logging
import math

import numpy as np
import pytest

from oracles import central_differences, pu_risk_terms
from conftest import make_doc
from punerboot.classifier import (
    ClassifierError, PuModel, TrainConfig, TypeModel, decide, dump_model, empirical_risk, expit, parse_model,
    predict, pu_risk, pu_risk_gradient, score, train,
)
from punerboot.corpus import I, O, Provenance, TagAssignment
from punerboot.features import FeatureVector, featurize_corpus


def logit(p):
    return math.log(p / (1 - p))


# -- risks ------------------------------------------------------------------

def test_empirical_risk_examples():
    assert empirical_risk([(0.8, 1), (0.6, 1)]) == pytest.approx(0.3, abs=1e-15)
    assert empirical_risk([(0.5, 0)]) == 0.5
    assert empirical_risk([(1.0, 1), (1e-12, 0)]) == pytest.approx(0.0, abs=1e-11)
    with pytest.raises(ClassifierError):
        empirical_risk([])


def test_pu_risk_unclamped_example():
    risk, clamp = pu_risk([0.8, 0.6], [0.1, 0.7, 0.2], 0.2)
    expected, expected_clamp = pu_risk_terms([0.8, 0.6], [0.1, 0.7, 0.2], 0.2, "mae")
    assert risk == pytest.approx(0.3 + 1 / 3 - 0.14, abs=1e-12)
    assert risk == pytest.approx(0.4933333333333333, abs=1e-12)
    assert risk == pytest.approx(expected, abs=1e-12)
    assert clamp is False and expected_clamp is False


def test_pu_risk_clamped_example():
    risk, clamp = pu_risk([0.99], [0.01, 0.02], 0.5)
    assert risk == pytest.approx(0.01, abs=1e-12)
    assert clamp is True
    assert pu_risk_terms([0.99], [0.01, 0.02], 0.5, "mae") == (pytest.approx(risk, abs=1e-12), True)


def test_zero_prior_is_pn_risk():
    pos, unl = [0.3, 0.9], [0.4, 0.1, 0.6]
    risk, clamp = pu_risk(pos, unl, 0.0)
    pn = empirical_risk([(s, 1) for s in pos]) + empirical_risk([(s, 0) for s in unl])
    assert risk == pytest.approx(pn, abs=1e-12)
    assert not clamp


def test_pu_risk_errors():
    with pytest.raises(ClassifierError):
        pu_risk([], [0.1], 0.1)
    with pytest.raises(ClassifierError):
        pu_risk([0.1], [], 0.1)


def test_pu_risk_bounds_and_permutation():
    rng = np.random.default_rng(3)
    for _ in range(200):
        pos = rng.uniform(0.01, 0.99, rng.integers(1, 8))
        unl = rng.uniform(0.01, 0.99, rng.integers(1, 8))
        prior = float(rng.uniform(0, 0.9))
        loss = ["mae", "bce"][int(rng.integers(2))]
        risk, _ = pu_risk(pos, unl, prior, loss)
        positive_term = empirical_risk([(s, 1) for s in pos], loss)
        assert risk >= positive_term - 1e-12
        assert risk == pytest.approx(pu_risk(rng.permutation(pos), rng.permutation(unl), prior, loss)[0],
                                     abs=1e-12)


# -- gradient ---------------------------------------------------------------

def tiny_problem(rng, n_weights=12):
    def vec():
        k = int(rng.integers(1, 5))
        return FeatureVector.from_ids(rng.choice(n_weights, size=k, replace=False), rng.uniform(0.5, 1.5, k))
    pos = [vec() for _ in range(int(rng.integers(1, 5)))]
    unl = [vec() for _ in range(int(rng.integers(1, 6)))]
    return np.arange(n_weights), rng.normal(0, 1, n_weights), float(rng.normal()), pos, unl


def risk_of(params, ids, t_prior, pos, unl, prior, loss):
    m = PuModel(["Brand"])
    m.types["Brand"] = TypeModel(t_prior, params[-1], ids, np.array(params[:-1]))
    return pu_risk([score(m, "Brand", x) for x in pos], [score(m, "Brand", x) for x in unl], prior, loss)[0]


def analytic(ids, w, b, pos, unl, prior, loss):
    m = PuModel(["Brand"])
    m.types["Brand"] = TypeModel(0.1, b, ids, w)
    grad, gb, _, clamp = pu_risk_gradient(m, "Brand", pos, unl, prior, loss)
    full = np.zeros(len(ids) + 1)
    full[grad.ids] = grad.values
    full[-1] = gb
    return full, clamp


@pytest.mark.parametrize("loss", ["mae", "bce"])
def test_gradient_matches_finite_differences(loss):
    rng = np.random.default_rng(17)
    for _ in range(30):
        ids, w, b, pos, unl = tiny_problem(rng)
        prior = float(rng.uniform(0.0, 0.9))
        a, _ = analytic(ids, w, b, pos, unl, prior, loss)
        n = central_differences(lambda p: risk_of(p, ids, 0.1, pos, unl, prior, loss), [*w, b])
        n = np.array(n)
        assert np.linalg.norm(a - n) / max(np.linalg.norm(n), 1e-8) < 1e-4


def test_clamped_gradient_is_positive_term_only():
    rng = np.random.default_rng(1)
    ids, w, b, pos, unl = tiny_problem(rng)
    # large prior and confident positives push the inner term below zero
    w = np.abs(w) + 2.0
    a_clamped, clamp = analytic(ids, w, b, pos, unl, 0.95, "mae")
    if not clamp:
        pytest.skip("instance did not clamp")
    m = PuModel(["Brand"])
    m.types["Brand"] = TypeModel(0.1, b, ids, w)
    p = np.array([score(m, "Brand", x) for x in pos])
    # positive term only: d/dz (1 - p) = -p(1-p), averaged over positives
    expected_bias = float(np.sum(-p * (1 - p)) / len(pos))
    assert a_clamped[-1] == pytest.approx(expected_bias, rel=1e-12)


@pytest.mark.parametrize("loss, slope", [("mae", 0.25), ("bce", 0.5)])
def test_bias_gradient_closed_form(loss, slope):
    # zero weights: every score is 0.5, |dl/dz| = slope for both labels
    m = PuModel(["Brand"])
    m.types["Brand"] = TypeModel(0.1)
    pos = [FeatureVector.from_ids([1, 2])] * 3
    unl = [FeatureVector.from_ids([3])] * 3
    prior = 0.2
    _, gb, risk, clamp = pu_risk_gradient(m, "Brand", pos, unl, prior, loss)
    assert not clamp
    # -slope (positive term) - prior*slope (correction) + slope (unlabeled term)
    assert gb == pytest.approx(-prior * slope, abs=1e-15)


# -- scoring and prediction -------------------------------------------------

def test_score_basics():
    m = PuModel(["Brand"])
    m.types["Brand"] = TypeModel(0.1)
    assert score(m, "Brand", FeatureVector.from_ids([5, 9])) == 0.5
    m.types["Brand"] = TypeModel(0.1, 0.0, np.array([5]), np.array([0.7]))
    once = score(m, "Brand", FeatureVector.from_ids([5], [2.0]))
    twice = score(m, "Brand", FeatureVector.from_ids([5, 5]))
    assert once == twice == pytest.approx(expit(1.4))
    probs = [score(TypeModelWrapper(b), "Brand", FeatureVector.from_ids([5])) for b in (0, 5, 50, 500)]
    assert probs == sorted(probs) and probs[-1] == pytest.approx(1.0)
    with pytest.raises(ClassifierError):
        score(m, "Product", FeatureVector.from_ids([1]))


def TypeModelWrapper(bias):
    m = PuModel(["Brand"])
    m.types["Brand"] = TypeModel(0.1, float(bias))
    return m


def test_decide_rules():
    types = ["Product", "Component", "Brand", "Attribute"]
    # rows are types, columns tokens; the three-way tie in the last column goes to Product
    probs = np.array([[0.1, 0.2, 0.7], [0.9, 0.1, 0.7], [0.6, 0.2, 0.7], [0.1, 0.1, 0.1]])
    assert decide(types, probs, 0.5) == [I("Component"), O, I("Product")]
    assert decide(types, probs, 0.95) == [O, O, O]


def bias_model(biases):
    m = PuModel(["Product", "Component", "Brand", "Attribute"])
    for t, p in biases.items():
        m.types[t] = TypeModel(0.01, logit(p))
    return m


def test_predict_threshold_argmax_and_ties():
    doc = make_doc(["a", "b"])
    [ta] = predict(bias_model({"Component": 0.7, "Brand": 0.7}), [doc], 0.5)
    assert ta.flat_tags() == [I("Component")] * 2
    assert set(ta.flat_provenance()) == {Provenance.PREDICTION}
    [ta] = predict(bias_model({"Component": 0.9, "Brand": 0.6}), [doc], 0.5)
    assert ta.flat_tags() == [I("Component")] * 2
    [ta] = predict(bias_model({"Component": 0.4, "Brand": 0.3}), [doc], 0.5)
    assert ta.flat_tags() == [O, O]
    assert set(ta.flat_provenance()) == {Provenance.UNLABELED}


# -- training ---------------------------------------------------------------

def separable_corpus(n=60):
    docs, tas = [], []
    for i in range(n):
        words = ["the", f"filler{i % 7}", "acme", "makes", "stuff"]
        docs.append(make_doc(words, doc_id=f"d{i}"))
        tags = [O, O, I("Brand"), O, O]
        provs = [Provenance.DICTIONARY if t.type else Provenance.UNLABELED for t in tags]
        tas.append(TagAssignment(f"d{i}", [tags], [provs]))
    return docs, tas


def test_training_reduces_risk():
    docs, tas = separable_corpus()
    cfg = TrainConfig(epochs=10, batch=16, seed=3, prior=0.2)
    model, traces = train(None, docs, tas, cfg, ["Brand"])
    assert traces["Brand"][-1] < traces["Brand"][0]
    assert len(traces["Brand"]) == 10
    [ta] = predict(model, docs[:1], 0.5)
    assert ta.flat_tags()[2] == I("Brand")


def test_training_is_deterministic():
    docs, tas = separable_corpus()
    cfg = TrainConfig(epochs=3, batch=8, seed=9)
    a, _ = train(None, docs, tas, cfg, ["Brand"])
    b, _ = train(None, docs, tas, cfg, ["Brand"])
    assert np.array_equal(a.types["Brand"].weights, b.types["Brand"].weights)
    assert a == b


def test_full_batch_trace_matches_exact_risk():
    docs, tas = separable_corpus(10)
    cfg = TrainConfig(epochs=1, full_batch=True, learning_rate=0.5, prior=0.1)
    model, traces = train(None, docs, tas, cfg, ["Brand"])
    X = featurize_corpus(docs)
    p = expit(model.logits_matrix("Brand", X))
    y = np.array([t.type == "Brand" for ta in tas for t in ta.flat_tags()])
    assert traces["Brand"][0] == pytest.approx(pu_risk(p[y], p[~y], 0.1)[0], abs=1e-12)


def test_degenerate_types_are_skipped(caplog):
    docs, tas = separable_corpus(5)
    all_pos = [TagAssignment(ta.doc_id, [[I("Brand")] * 5], [[Provenance.DICTIONARY] * 5]) for ta in tas]
    with caplog.at_level(logging.WARNING):
        model, traces = train(None, docs, all_pos, TrainConfig(epochs=1), ["Brand", "Product"])
    assert model.trained_types() == [] and traces == {}
    assert "Brand" in caplog.text and "Product" in caplog.text


def test_empty_corpus_rejected():
    with pytest.raises(ClassifierError):
        train(None, [], [], TrainConfig(), ["Brand"])


def test_config_validation():
    for bad in (dict(learning_rate=0), dict(epochs=0), dict(batch=0), dict(tau=1.0), dict(prior=0.0),
                dict(loss="hinge"), dict(risk="upu")):
        with pytest.raises(ClassifierError):
            TrainConfig(**bad)


def test_threshold_monotone():
    docs, tas = separable_corpus()
    model, _ = train(None, docs, tas, TrainConfig(epochs=2, seed=1), ["Brand"])
    counts = [sum(t.type is not None for ta in predict(model, docs, tau) for t in ta.flat_tags())
              for tau in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert counts == sorted(counts, reverse=True)


def test_model_text_round_trip():
    docs, tas = separable_corpus()
    model, _ = train(None, docs, tas, TrainConfig(epochs=2, seed=1), ["Brand", "Product"])
    buf = io.StringIO()
    dump_model(model, buf)
    again = parse_model(io.StringIO(buf.getvalue()))
    assert again == model
    out = io.StringIO()
    dump_model(again, out)
    assert out.getvalue() == buf.getvalue()


def test_model_file_rejects_garbage():
    with pytest.raises(ClassifierError):
        parse_model(io.StringIO("hello\n"))
