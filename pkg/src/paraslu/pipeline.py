"""Confidence-gated hybrid parsing with paraphrase voting."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .parser import Parse, ParserModel, make_parse
from .rnnpara import LanguageModel, generate_rnn_paraphrases
from .seq2seqpara import MultiTaskSeq2Seq

log = logging.getLogger(__name__)

GATE_PASSED, VOTED = "gate_passed", "voted"
MODES = ("rnn", "seq2seq", "both", "none")

Alignment = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class Candidate:
    tokens: Tuple[str, ...]
    parse: Parse
    alignment: Alignment
    source: str

    def to_dict(self) -> dict:
        return {"tokens": list(self.tokens), "source": self.source,
                "intent": self.parse.intent, "tags": list(self.parse.tags),
                "s_total": self.parse.s_total,
                "alignment": [list(a) for a in self.alignment]}


@dataclass(frozen=True)
class VotedParse:
    parse: Parse
    provenance: str
    base: Parse
    candidates: Tuple[Candidate, ...] = ()
    warnings: Tuple[str, ...] = ()


@dataclass
class HybridParser:
    base: ParserModel
    rnn_gen: Optional[Tuple[LanguageModel, LanguageModel, int]] = None
    s2s_gen: Optional[MultiTaskSeq2Seq] = None
    tau: float = 0.8
    mode: str = "rnn"
    max_decode_len: int = 30
    n_candidates: int = 2

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode in ("rnn", "both") and self.rnn_gen is None:
            raise ValueError(f"mode {self.mode!r} needs the language-model generator")
        if self.mode in ("seq2seq", "both") and self.s2s_gen is None:
            raise ValueError(f"mode {self.mode!r} needs the seq2seq generator")


def lcs_alignment(original: Sequence[str], candidate: Sequence[str]) -> Alignment:
    """Index pairs of a longest common subsequence of equal tokens.

    Ties prefer matching earlier original positions.
    """
    n, m = len(original), len(candidate)
    L = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if original[i] == candidate[j]:
                L[i][j] = L[i + 1][j + 1] + 1
            else:
                L[i][j] = max(L[i + 1][j], L[i][j + 1])
    pairs, i, j = [], 0, 0
    while i < n and j < m:
        if original[i] == candidate[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif L[i + 1][j] >= L[i][j + 1]:
            i += 1
        else:
            j += 1
    return tuple(pairs)


def positional_alignment(n: int) -> Alignment:
    return tuple((i, i) for i in range(n))


def _plurality(votes: Sequence[str], fallback: str, strength=None) -> str:
    counts = Counter(votes)
    top = max(counts.values())
    tied = [v for v in counts if counts[v] == top]
    if len(tied) == 1:
        return tied[0]
    if strength is not None:
        best = max(strength[v] for v in tied)
        tied = [v for v in tied if strength[v] == best]
        if len(tied) == 1:
            return tied[0]
    return fallback if fallback in tied else min(tied)


def vote(base: Parse, candidates: Sequence[Tuple[Parse, Alignment]],
         original_tokens: Sequence[str]) -> Parse:
    """Majority vote over the base parse and candidate parses.

    Intent: plurality, ties by the highest supporting s_intent, then the base
    intent. Tag at original position i: plurality over the base tag and every
    candidate tag aligned to i, ties by the base tag. Reported probabilities
    are the strongest supporting probability for each winning label.
    """
    if not candidates:
        return base
    n = len(original_tokens)
    parses = [base] + [c for c, _ in candidates]
    strength = {}
    for p in parses:
        strength[p.intent] = max(strength.get(p.intent, 0.0), p.s_intent)
    intent = _plurality([p.intent for p in parses], base.intent, strength)
    intent_prob = strength[intent]

    votes = [[(base.tags[i], base.tag_probs[i])] for i in range(n)]
    for cand, alignment in candidates:
        for i, j in alignment:
            if 0 <= i < n and 0 <= j < len(cand.tags):
                votes[i].append((cand.tags[j], cand.tag_probs[j]))
    tags, probs = [], []
    for i in range(n):
        tag = _plurality([t for t, _ in votes[i]], base.tags[i])
        tags.append(tag)
        probs.append(max(p for t, p in votes[i] if t == tag))
    return make_parse(intent, intent_prob, tags, probs)


def _generate(hp: HybridParser, tokens: Tuple[str, ...], base: Parse) -> List[Tuple[Tuple[str, ...], Alignment, str]]:
    out = []
    if hp.mode in ("rnn", "both"):
        lf, lb, width = hp.rnn_gen
        k = min(hp.n_candidates, 2 * width)
        for cand in generate_rnn_paraphrases(lf, lb, tokens, base, width, k):
            out.append((tuple(cand), positional_alignment(len(tokens)), "rnn"))
    if hp.mode in ("seq2seq", "both"):
        pair = hp.s2s_gen.decode_paraphrases(tokens, hp.max_decode_len)
        for cand, src in ((pair.paraphrase, "d1"), (pair.reconstruction, "d2")):
            if cand:
                out.append((tuple(cand), lcs_alignment(tokens, cand), src))
    return out


def hybrid_parse(hp: HybridParser, tokens: Sequence[str], base: Optional[Parse] = None) -> VotedParse:
    """Parse; below the confidence threshold, vote with parses of paraphrases.

    ``base`` may carry a precomputed base parse of ``tokens``.
    """
    tokens = tuple(tokens)
    if not tokens:
        raise ValueError("cannot parse an empty utterance")
    if base is None:
        base = hp.base.parse(tokens)
    if hp.mode == "none" or base.s_total >= hp.tau:
        return VotedParse(base, GATE_PASSED, base)
    try:
        generated = _generate(hp, tokens, base)
    except Exception as exc:  # generator failures must not break parsing
        msg = f"paraphrase generation failed: {exc}"
        log.warning(msg)
        return VotedParse(base, VOTED, base, (), (msg,))
    cands = []
    if generated:
        parses = hp.base.parse_batch([g[0] for g in generated])
        cands = [Candidate(t, p, a, s) for (t, a, s), p in zip(generated, parses)]
    final = vote(base, [(c.parse, c.alignment) for c in cands], tokens)
    return VotedParse(final, VOTED, base, tuple(cands))


def hybrid_parse_batch(hp: HybridParser, utterances: Sequence[Sequence[str]]) -> List[VotedParse]:
    bases = hp.base.parse_batch([tuple(u) for u in utterances])
    return [hybrid_parse(hp, u, b) for u, b in zip(utterances, bases)]
