import numpy as np
import pytest

import reinforce_check
from helpers import tiny_model
from tsparser.datasets import DistantSentence, Mention, SupervisedExample, WeakExample
from tsparser.decode import Candidate, CandidateSet, Linker, prepare
from tsparser.learn import (FEATURES, EmptyCandidates, Embeddings, Ranker, TrainConfig, WeakConfig,
                            beam_sweep, evaluate, f1, is_consistent, loss_supervised, rank,
                            ranker_features, synth_distant, synth_sentence, train_supervised,
                            weak_step)
from tsparser.learn import supervised
from tsparser.learn.distant import SkippedSentence
from tsparser.learn.ranker import lemmatize, ranker_objective_grad, ranker_step
from tsparser.neural.optim import MomentumSGD
from tsparser.resources import data_path
from tsparser.semantics import EntityRef, Number, UnknownSymbol, load_kb, parse_funql
from tsparser.transitions import oracle
from tsparser.vocab import WordVocab

WORDS = "how many daughters does obama have".split()


@pytest.fixture(scope="module")
def kb():
    return load_kb(data_path("toy_kb.tsv"))


@pytest.fixture(scope="module")
def linker():
    return Linker.load(data_path("toy_linker.tsv"))


# -- supervised ------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["td", "bu"])
def test_single_example_loss_decreases_monotonically(kb, linker, mode):
    ex = SupervisedExample("how many daughters does obama have",
                           parse_funql("count(daughterOf(Barack_Obama))"))
    m = tiny_model(kb, ex.words, mode=mode, dim=16, seed=2)
    losses = []
    train_supervised(m, kb, [ex], config=TrainConfig(epochs=12, lr=0.01), linker=linker,
                     callback=lambda row: losses.append(row["loss"]))
    assert len(losses) == 12
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def test_inadmissible_oracle_is_skipped(kb, linker):
    # a bare entity cannot be generated top-down
    exs = [SupervisedExample("obama", parse_funql("Barack_Obama")),
           SupervisedExample("daughters of obama", parse_funql("daughterOf(Barack_Obama)"))]
    m = tiny_model(kb, ["obama", "daughters", "of"], mode="td")
    res = train_supervised(m, kb, exs, config=TrainConfig(epochs=1), linker=linker)
    assert res.skipped == 1


def test_empty_training_set_rejected(kb):
    with pytest.raises(ValueError):
        train_supervised(tiny_model(kb), kb, [])


def test_surrogate_value_is_negative_log_likelihood(kb, linker):
    m = tiny_model(kb, WORDS, attention="hard", dim=8, seed=1)
    from tsparser.decode import entity_mask
    prep = prepare(m, kb, WORDS, entity_mask(WORDS, linker))
    d = oracle(parse_funql("count(daughterOf(Barack_Obama))"), "td")
    rng = np.random.default_rng(0)
    fp = supervised.teacher_force(m, prep, d, rng, training=True)
    assert np.isclose(float(supervised.surrogate_loss(fp).data), -float(fp.log_likelihood().data))


# -- REINFORCE -------------------------------------------------------------------------

@pytest.mark.parametrize("variant, z", [("hard", 3.0), ("binomial", 4.0)])
def test_reinforce_is_unbiased(variant, z):
    ok, worst, n = reinforce_check.compare(variant, n=20_000, seed=1, z=z)
    assert n > 0 and ok, worst


def test_reinforce_without_score_term_is_biased(monkeypatch):
    monkeypatch.setattr(supervised, "surrogate_loss",
                        lambda fp: supervised.T.scale(fp.log_likelihood(), -1.0))
    ok, worst, _ = reinforce_check.compare("hard", n=50_000, seed=0)
    assert not ok and worst > 10


def test_reinforce_requires_sampled_attention(kb):
    m = tiny_model(kb, WORDS)
    with pytest.raises(ValueError):
        supervised.reinforce_grads(m, prepare(m, kb, WORDS), oracle(parse_funql("a"), "bu"))


# -- ranker ----------------------------------------------------------------------------

def _emb(words):
    v = WordVocab()
    for w in words:
        v.add(w)
    rng = np.random.default_rng(0)
    return Embeddings(v, rng.normal(size=(len(v), 5)))


def test_overlap_zero_without_shared_tokens():
    emb = _emb(["foo", "bar", "daughter", "of", "barack", "obama"])
    phi = ranker_features(["foo", "bar"], parse_funql("daughterOf(Barack_Obama)"), None, emb)
    assert phi[FEATURES.index("overlap")] == 0


def test_denotation_size_feature():
    emb = _emb(["x"])
    den = frozenset({EntityRef("Malia_Obama"), EntityRef("Sasha_Obama")})
    phi = ranker_features(["x"], parse_funql("daughterOf(Barack_Obama)"), den, emb)
    assert phi[FEATURES.index("denotation_size")] == 2


def test_stopwords_are_ignored():
    emb = _emb(["capital", "of", "texas"])
    lf = parse_funql("capital(Texas)")
    with_sw = ranker_features(["the", "capital", "of", "texas"], lf, None, emb, frozenset({"the", "of"}))
    assert with_sw[FEATURES.index("overlap")] == 2


def test_lemmatizer_suffixes():
    assert [lemmatize(w) for w in ("daughters", "cities", "founded", "running", "is")] == \
        ["daughter", "city", "found", "runn", "is"]


def test_ranker_gradient_zero_for_all_consistent_identical():
    phi = np.tile(np.arange(len(FEATURES), dtype=float), (4, 1))
    value, grad = ranker_objective_grad(np.zeros(len(FEATURES)), phi, np.ones(4, dtype=bool))
    assert np.isclose(value, 0.0) and np.allclose(grad, 0.0)


def test_ranker_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    phi, theta = rng.normal(size=(6, len(FEATURES))), rng.normal(size=len(FEATURES))
    mask = np.array([1, 0, 1, 0, 0, 0], dtype=bool)
    _, g = ranker_objective_grad(theta, phi, mask)
    eps, num = 1e-6, np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.eye(len(theta))[i] * eps
        num[i] = (ranker_objective_grad(theta + e, phi, mask)[0] - ranker_objective_grad(theta - e, phi, mask)[0]) / (2 * eps)
    assert np.allclose(g, num, atol=1e-7)


def test_ranker_step_raises_consistent_mass():
    rng = np.random.default_rng(1)
    phi = rng.normal(size=(5, len(FEATURES)))
    mask = np.array([0, 1, 0, 0, 1], dtype=bool)
    r = Ranker()
    opt = MomentumSGD(0.1, 0.0)
    before = ranker_step(r, phi, mask, opt)
    after = ranker_objective_grad(r.theta, phi, mask)[0]
    assert after > before


def test_ranker_weight_length_checked():
    with pytest.raises(ValueError):
        Ranker(np.zeros(3))


def _cand(text, logprob, den=None):
    lf = parse_funql(text)
    return Candidate(lf, logprob, den, oracle(lf, "bu"))


def test_rank_ties_break_on_logprob_then_text():
    emb = _emb(["x"])
    r = Ranker()  # theta = 0: every score ties
    cands = [_cand("b", -2.0), _cand("c", -1.0), _cand("a", -1.0)]
    assert rank(cands, r, ["x"], emb).text == "a"
    with pytest.raises(EmptyCandidates):
        rank([], r, ["x"], emb)


# -- weak supervision ------------------------------------------------------------------

def test_consistency_is_exact_equality():
    a, b = EntityRef("a"), EntityRef("b")
    assert is_consistent(frozenset({a}), frozenset({a}))
    assert not is_consistent(frozenset({a, b}), frozenset({a}))
    assert not is_consistent(None, frozenset({a}))
    assert is_consistent(frozenset({a}), frozenset({a}), exactly_one=True)
    assert not is_consistent(frozenset({a, b}), frozenset({a, b}), exactly_one=True)


def test_no_consistent_form_leaves_everything_untouched(kb, linker):
    m = tiny_model(kb, WORDS, mode="bu", seed=3)
    r = Ranker(np.arange(len(FEATURES), dtype=float))
    ex = WeakExample("how many daughters does obama have", frozenset({Number(12345)}))
    opt, ropt = MomentumSGD(0.01, 0.9), MomentumSGD(0.01, 0.9)
    opt.velocity["W_u"] = np.ones_like(m["W_u"].data)
    before, theta = m.snapshot(), r.theta.copy()
    rep = weak_step(m, r, kb, ex, WeakConfig(train_beam=30), opt, ropt, np.random.default_rng(0), linker)
    assert not rep.updated and rep.n_consistent == 0
    for k, v in before.items():
        assert np.array_equal(v, m[k].data)
    assert np.array_equal(theta, r.theta)
    assert np.array_equal(opt.velocity["W_u"], np.ones_like(m["W_u"].data)) and not ropt.velocity


def test_weak_step_updates_parser_and_ranker_separately(kb, linker):
    m = tiny_model(kb, WORDS, mode="bu", seed=3)
    r = Ranker()
    ex = WeakExample("how many daughters does obama have", frozenset({Number(2)}))
    opt, ropt = MomentumSGD(0.01, 0.9), MomentumSGD(0.01, 0.9)
    before = m.snapshot()
    rep = weak_step(m, r, kb, ex, WeakConfig(train_beam=300), opt, ropt, np.random.default_rng(0), linker)
    assert rep.updated and rep.n_consistent > 0
    assert any(not np.array_equal(v, m[k].data) for k, v in before.items())
    assert "ranker.theta" not in opt.velocity and set(ropt.velocity) == {"ranker.theta"}


# -- distant supervision ---------------------------------------------------------------

NVIDIA = DistantSentence("NVIDIA was founded by Jen-Hsun_Huang and Chris_Malachowsky".split(),
                         [Mention((0, 1), "NVIDIA"), Mention((4, 5), "Jen-Hsun_Huang"),
                          Mention((6, 7), "Chris_Malachowsky")])


def test_nvidia_sentence(kb):
    out = synth_sentence(NVIDIA, kb)
    assert out[-1].utterance == "NVIDIA was founded by Jen-Hsun_Huang and _blank_"
    assert out[-1].denotation == frozenset({EntityRef("Chris_Malachowsky")})
    assert all(ex.utterance.split().count("_blank_") == 1 for ex in out)


def test_the_marks_exactly_one():
    s = DistantSentence("Columbus is the capital of Ohio".split(),
                        [Mention((0, 1), "Columbus"), Mention((5, 6), "Ohio")])
    s2 = DistantSentence("the Ohio river borders Columbus".split(),
                         [Mention((1, 2), "Ohio"), Mention((4, 5), "Columbus")])
    assert [ex.exactly_one for ex in synth_sentence(s)] == [False, False]
    assert [ex.exactly_one for ex in synth_sentence(s2)] == [True, False]


def test_single_mention_skipped(kb):
    s = DistantSentence("Boise grew quickly".split(), [Mention((0, 1), "Boise")])
    with pytest.raises(SkippedSentence):
        synth_sentence(s)
    assert synth_distant([s, NVIDIA], kb)[0].utterance.startswith("_blank_")


def test_unknown_mention_entity(kb):
    s = DistantSentence("x y".split(), [Mention((0, 1), "Nobody"), Mention((1, 2), "Ohio")])
    with pytest.raises(UnknownSymbol):
        synth_sentence(s, kb)


# -- evaluation ------------------------------------------------------------------------

def test_f1_values():
    a, b, c = EntityRef("a"), EntityRef("b"), EntityRef("c")
    assert f1({a}, {a}) == 1.0
    assert f1(None, {a}) == 0.0
    assert np.isclose(f1({a, b}, {a, c}), 0.5)
    assert f1(set(), set()) == 1.0


def test_evaluate_and_sweep_shapes(kb, linker):
    m = tiny_model(kb, WORDS, mode="bu", seed=3)
    data = [WeakExample("how many daughters does obama have", frozenset({Number(2)}))]
    rep = evaluate(m, kb, data, None, 20, linker)
    assert rep.n == 1 and rep.exact_match is None and 0 <= rep.correct <= rep.answerable <= 1
    rows = beam_sweep(m, kb, data, [5, 50], None, linker)
    assert [w for w, _, _ in rows] == [5, 50]
    sup = [SupervisedExample("how many daughters does obama have", parse_funql("count(daughterOf(Barack_Obama))"))]
    assert evaluate(m, kb, sup, None, 5, linker).exact_match in (0.0, 1.0)
    assert evaluate(m, kb, [], None, 5, linker).n == 0


def test_candidate_set_best():
    assert CandidateSet([]).best is None
