
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paraslu.config import Hyper
from paraslu.corpus import BLANK, RESERVED, CorpusError, build_vocab
from paraslu.parser import make_parse
from paraslu.rnnpara import (BACKWARD, FORWARD, LanguageModel, Template, bidirectional_score,
                             build_template, constrained_beam_search, generate_rnn_paraphrases,
                             train_lm)

from oracles import enumerate_fills

SENTS = [("show", "me", "a", "flight"), ("a", "cheap", "flight", "please"), ("show", "cheap", "fares")]
LM_HYPER = Hyper(emb_dim=16, hidden=24, epochs=60, batch_size=3, lr=0.02)


@pytest.fixture(scope="module")
def lms():
    vocab = build_vocab(SENTS)
    return (train_lm(SENTS, FORWARD, LM_HYPER, 1, vocab), train_lm(SENTS, BACKWARD, LM_HYPER, 1, vocab))


def parse_for(tags, probs):
    return make_parse("f", 0.9, tags, probs)


# -- language models ---------------------------------------------------------------

def test_memorization_perplexity(lms):
    lf, lb = lms
    assert lf.perplexity(SENTS) < 1.5
    assert lb.perplexity(SENTS) < 1.5


def test_backward_orientation():
    lm = LanguageModel(build_vocab([["a", "b", "c"]]), BACKWARD, Hyper())
    assert lm.orient(["a", "b", "c"]) == ["c", "b", "a"]
    with pytest.raises(ValueError):
        LanguageModel(lm.vocab, "sideways", Hyper())


def test_training_deterministic(tmp_path):
    h = Hyper(emb_dim=8, hidden=8, epochs=2, word_dropout=0.2)
    for k in (1, 2):
        train_lm(SENTS, BACKWARD, h, 3).save(str(tmp_path / f"{k}.ckpt"))
    assert (tmp_path / "1.ckpt").read_bytes() == (tmp_path / "2.ckpt").read_bytes()
    back = LanguageModel.load(str(tmp_path / "1.ckpt"))
    assert back.direction == BACKWARD


def test_empty_input_rejected():
    with pytest.raises(CorpusError):
        train_lm([], FORWARD, LM_HYPER, 1)


def test_log_likelihood_counts_terms(lms):
    lf, _ = lms
    ll, n = lf.log_likelihood(["show", "me"])
    assert n == 3 and ll < 0
    ll2, n2 = lf.log_likelihood(["show", "me"], eos=False)
    assert n2 == 2 and ll2 > ll


# -- templates ------------------------------------------------------------------------

def test_template_fixture():
    tokens = "i need a flight from chicago to san francisco on a thursday".split()
    tags = ["O", "O", "O", "O", "O", "B-from", "O", "B-to", "I-to", "O", "O", "B-day"]
    context = iter([0.60, 0.55, 0.90, 0.92, 0.95, 0.93, 0.90, 0.50])
    probs = [next(context) if t == "O" else 0.99 for t in tags]
    tpl = build_template(tokens, parse_for(tags, probs))
    assert str(tpl) == f"{BLANK} {BLANK} a flight from chicago to san francisco on {BLANK} thursday"


def test_template_equal_context_probs_all_blank():
    tpl = build_template(["a", "b", "c"], parse_for(["O", "B-x", "O"], [0.7, 0.2, 0.7]))
    assert tpl.keep == (False, True, False)


def test_template_no_context_words():
    tpl = build_template(["a", "b"], parse_for(["B-x", "I-x"], [0.1, 0.2]))
    assert tpl.blanks == 0


@given(st.lists(st.tuples(st.sampled_from(["O", "B-x", "I-x", "B-y"]), st.floats(0.01, 1.0)),
                min_size=1, max_size=12))
def test_slot_words_never_blanked(cells):
    tags = [t for t, _ in cells]
    tpl = build_template([f"w{i}" for i in range(len(cells))], parse_for(tags, [p for _, p in cells]))
    assert all(k for k, t in zip(tpl.keep, tags) if t != "O")


def test_template_misaligned():
    with pytest.raises(ValueError):
        build_template(["a"], parse_for(["O", "O"], [0.5, 0.5]))


# -- constrained beam search ----------------------------------------------------------

def test_no_blank_returns_original(lms):
    lf, _ = lms
    toks = ("show", "me", "a", "flight")
    hyps = constrained_beam_search(lf, Template(toks, (True,) * 4), 3)
    assert len(hyps) == 1 and hyps[0].tokens == toks
    assert hyps[0].logp == pytest.approx(lf.log_likelihood(toks, eos=False)[0])


def test_single_blank_matches_enumeration(lms):
    lf, _ = lms
    words = len(lf.vocab) - len(RESERVED)
    tpl = Template(("x",), (False,))
    hyps = constrained_beam_search(lf, tpl, words)
    want = enumerate_fills(lf, tpl)
    assert [h.tokens for h in hyps] == [t for _, t in want]
    np.testing.assert_allclose([h.logp for h in hyps], [s for s, _ in want], rtol=1e-9)


def test_oov_keep_token_is_emitted_verbatim(lms):
    lf, lb = lms
    tpl = Template(("show", "zebra", "x"), (True, True, False))
    for lm in (lf, lb):
        for h in constrained_beam_search(lm, tpl, 3):
            assert h.tokens[:2] == ("show", "zebra")


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_beam_constraints(seed, width):
    rng = np.random.default_rng(seed)
    lf, lb = _LMS
    n = int(rng.integers(1, 7))
    toks = tuple(rng.choice(["show", "me", "zebra", "flight"], size=n))
    tpl = Template(toks, tuple(bool(b) for b in rng.integers(0, 2, size=n)))
    for lm in (lf, lb):
        hyps = constrained_beam_search(lm, tpl, width)
        assert 1 <= len(hyps) <= width
        assert [h.logp for h in hyps] == sorted((h.logp for h in hyps), reverse=True)
        for h in hyps:
            assert tpl.matches(h.tokens) and h.logp <= 0
            assert all(h.tokens[i] in lm.vocab.tokens for i, k in enumerate(tpl.keep) if not k)


def test_exhaustive_width_gives_all_fills_both_directions(lms):
    lf, lb = lms
    tpl = Template(("a", "x", "flight", "x"), (True, False, True, False))
    V = len(lf.vocab) - len(RESERVED)
    fwd = {h.tokens for h in constrained_beam_search(lf, tpl, V * V)}
    bwd = {h.tokens for h in constrained_beam_search(lb, tpl, V * V)}
    assert fwd == bwd == {t for _, t in enumerate_fills(lf, tpl)}


def test_width_must_be_positive(lms):
    with pytest.raises(ValueError):
        constrained_beam_search(lms[0], Template(("a",), (True,)), 0)


# -- bidirectional rescoring ----------------------------------------------------------

def test_no_blank_paraphrase_is_original(lms):
    lf, lb = lms
    toks = ["show", "me", "a", "flight"]
    out = generate_rnn_paraphrases(lf, lb, toks, parse_for(["B-x"] * 4, [0.9] * 4), width=3, k=2)
    assert out == [toks]


def test_top_k_sorted(lms):
    lf, lb = lms
    toks = ["show", "me", "a", "flight"]
    parse = parse_for(["O", "O", "O", "B-x"], [0.5, 0.4, 0.9, 0.9])
    out = generate_rnn_paraphrases(lf, lb, toks, parse, width=5, k=2, return_scores=True)
    assert len(out) == 2 and out[0][1] >= out[1][1]
    for cand, score in out:
        assert score == pytest.approx(bidirectional_score(lf, lb, cand))
        assert cand[3] == "flight"


def test_bidirectional_score_definition(lms):
    lf, lb = lms
    toks = ["a", "cheap", "flight"]
    a, n = lf.log_likelihood(toks)
    b, m = lb.log_likelihood(toks[::-1])
    assert bidirectional_score(lf, lb, toks) == pytest.approx((a / n + b / m) / 2)


def test_generate_argument_checks(lms):
    lf, lb = lms
    p = parse_for(["O"], [0.5])
    with pytest.raises(ValueError):
        generate_rnn_paraphrases(lb, lf, ["a"], p)
    with pytest.raises(ValueError):
        generate_rnn_paraphrases(lf, lb, ["a"], p, width=1, k=3)


_vocab = build_vocab(SENTS)
_LMS = (train_lm(SENTS, FORWARD, Hyper(emb_dim=8, hidden=8, epochs=3), 2, _vocab),
        train_lm(SENTS, BACKWARD, Hyper(emb_dim=8, hidden=8, epochs=3), 2, _vocab))
