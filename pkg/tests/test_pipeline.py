import pytest
from hypothesis import given, strategies as st

from paraslu import pipeline
from paraslu.parser import make_parse
from paraslu.pipeline import (GATE_PASSED, VOTED, HybridParser, hybrid_parse, hybrid_parse_batch,
                              lcs_alignment, positional_alignment, vote)
from paraslu.seq2seqpara import DecodedPair

TOKENS = ("flights", "from", "boston", "to", "denver")
TAGS = ("O", "O", "B-from", "O", "B-to")


def P(intent, s_intent=0.9, tags=TAGS, probs=None):
    return make_parse(intent, s_intent, tags, probs or [0.9] * len(tags))


class StubParser:
    """Parses by table lookup; unknown sentences get ``default``."""

    def __init__(self, table, default=None):
        self.table, self.default = table, default

    def parse(self, tokens):
        return self.table.get(tuple(tokens), self.default)

    def parse_batch(self, batch):
        return [self.parse(t) for t in batch]


class StubS2S:
    def __init__(self, d1, d2):
        self.out = DecodedPair(tuple(d1), tuple(d2))

    def decode_paraphrases(self, tokens, max_len):
        return self.out


class Broken:
    def decode_paraphrases(self, tokens, max_len):
        raise RuntimeError("boom")


def hp_with(base_parse, cand_parses=(), d1=("a",), d2=("b",), tau=0.8, mode="seq2seq"):
    table = {TOKENS: base_parse, tuple(d1): cand_parses[0] if cand_parses else base_parse,
             tuple(d2): cand_parses[1] if len(cand_parses) > 1 else base_parse}
    return HybridParser(StubParser(table), s2s_gen=StubS2S(d1, d2), tau=tau, mode=mode)


def test_gate_passes_confident_parse():
    base = P("flight", 0.85, probs=[0.99] * 5)
    assert base.s_total == 0.85
    out = hybrid_parse(hp_with(base, (P("airfare"), P("airfare"))), TOKENS)
    assert out.provenance == GATE_PASSED and out.parse is base and out.candidates == ()


def test_unanimous_copies_return_base():
    base = P("flight", 0.5)
    out = hybrid_parse(hp_with(base, d1=TOKENS, d2=TOKENS), TOKENS)
    assert out.provenance == VOTED and len(out.candidates) == 2
    assert out.parse == base


def test_intent_majority():
    out = hybrid_parse(hp_with(P("flight", 0.5), (P("flight"), P("airfare"))), TOKENS)
    assert out.parse.intent == "flight"


def test_vote_without_candidates_is_base():
    base = P("flight", 0.5)
    assert vote(base, [], TOKENS) is base


def test_intent_tie_by_confidence_then_base():
    base = P("flight", 0.6)
    a = (P("airfare", 0.95, tags=("O",)), ((0, 0),))
    b = (P("flight", 0.9, tags=("O",)), ((0, 0),))
    assert vote(base, [a, b], TOKENS).intent == "flight"
    c = (P("ground", 0.99, tags=("O",)), ((0, 0),))
    # three-way tie: the most confident supporter wins
    assert vote(base, [a, c], TOKENS).intent == "ground"
    # equal confidence: base wins
    d = (P("ground", 0.6, tags=("O",)), ((0, 0),))
    assert vote(base, [d], TOKENS).intent == "flight"


def test_positional_flip_outvoted():
    base = P("flight", 0.5)
    flipped = P("flight", tags=("O", "O", "B-to", "O", "B-to"))
    out = vote(base, [(flipped, positional_alignment(5)), (P("flight"), positional_alignment(5))], TOKENS)
    assert out.tags == TAGS


def test_tag_tie_keeps_base():
    base = P("flight", 0.5)
    other = P("flight", tags=("O", "O", "B-to", "O", "B-to"))
    assert vote(base, [(other, positional_alignment(5))], TOKENS).tags == TAGS


def test_lcs_alignment():
    orig = ("show", "flights", "from", "boston")
    cand = ("please", "flights", "leaving", "boston")
    assert lcs_alignment(orig, cand) == ((1, 1), (3, 3))
    assert lcs_alignment(orig, ()) == ()


def test_seq2seq_candidates_vote_only_on_aligned_tokens():
    base = P("flight", 0.5, tags=("O", "O", "B-to", "O", "B-to"))
    d1 = ("list", "boston", "to", "denver")
    d2 = ("boston", "flights")
    parses = (P("flight", tags=("O", "B-from", "O", "B-to")), P("flight", tags=("B-from", "O")))
    out = hybrid_parse(hp_with(base, parses, d1, d2), TOKENS)
    # "boston" is aligned in both candidates, which outvote the base tag
    assert out.parse.tags == ("O", "O", "B-from", "O", "B-to")
    assert out.candidates[1].alignment == ((2, 0),)


@given(st.lists(st.sampled_from(["a", "b", "c", "boston"]), min_size=0, max_size=9))
def test_output_length_is_original(cand):
    base = P("flight", 0.5)
    cp = P("flight", tags=("B-x",) * len(cand)) if cand else None
    cands = [(cp, lcs_alignment(TOKENS, cand))] if cand else []
    assert len(vote(base, cands, TOKENS).tags) == len(TOKENS)


def test_generator_failure_falls_back():
    base = P("flight", 0.5)
    hp = HybridParser(StubParser({TOKENS: base}), s2s_gen=Broken(), mode="seq2seq")
    out = hybrid_parse(hp, TOKENS)
    assert out.parse is base and out.warnings and "boom" in out.warnings[0]


def test_mode_none_is_base_parse():
    base = P("flight", 0.1)
    hp = HybridParser(StubParser({TOKENS: base}), mode="none")
    assert hybrid_parse(hp, TOKENS).parse is base


def test_both_mode_pools_all_candidates(monkeypatch):
    base = P("flight", 0.5)
    monkeypatch.setattr(pipeline, "generate_rnn_paraphrases",
                        lambda lf, lb, toks, parse, width, k: [list(TOKENS), list(TOKENS)])
    hp = HybridParser(StubParser({TOKENS: base}, P("flight")), rnn_gen=(None, None, 5),
                      s2s_gen=StubS2S(("a",), ("b",)), mode="both")
    out = hybrid_parse(hp, TOKENS)
    assert [c.source for c in out.candidates] == ["rnn", "rnn", "d1", "d2"]


def test_configuration_errors():
    with pytest.raises(ValueError):
        HybridParser(StubParser({}), mode="rnn")
    with pytest.raises(ValueError):
        HybridParser(StubParser({}), s2s_gen=StubS2S("a", "b"), mode="seq2seq", tau=1.5)
    with pytest.raises(ValueError):
        HybridParser(StubParser({}), mode="sideways")


def test_empty_tokens_rejected():
    with pytest.raises(ValueError):
        hybrid_parse(hp_with(P("f")), ())


def test_batch_matches_single():
    base = P("flight", 0.5)
    hp = hp_with(base, (P("airfare"), P("airfare")))
    assert hybrid_parse_batch(hp, [TOKENS])[0] == hybrid_parse(hp, TOKENS)
