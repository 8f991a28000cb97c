"""Intent accuracy, span-level slot F1 and sentence BLEU."""
from __future__ import annotations

import math
from collections import Counter
from typing import List, Sequence, Set, Tuple

Span = Tuple[int, int, str]


def intent_accuracy(pred: Sequence[str], gold: Sequence[str]) -> float:
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predictions for {len(gold)} gold intents")
    if not gold:
        return 0.0
    return sum(p == g for p, g in zip(pred, gold)) / len(gold)


def spans(tags: Sequence[str]) -> List[Span]:
    """Decode (start, end inclusive, label) spans.

    ``B-x`` always opens a span; ``I-x`` and bare ``x`` extend an open span
    of the same label and otherwise open a new one.
    """
    out: List[Span] = []
    start, label = None, None
    for i, tag in enumerate(list(tags) + ["O"]):
        if tag == "O":
            prefix, lab = "O", None
        elif len(tag) > 2 and tag[1] == "-" and tag[0] in "BI":
            prefix, lab = tag[0], tag[2:]
        else:
            prefix, lab = "", tag
        if label is not None and (prefix in ("O", "B") or lab != label):
            out.append((start, i - 1, label))
            start, label = None, None
        if lab is not None and label is None:
            start, label = i, lab
    return out


def slot_f1(pred: Sequence[Sequence[str]], gold: Sequence[Sequence[str]]) -> float:
    """Micro-averaged F1 over exactly matching spans."""
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted sequences for {len(gold)} gold")
    tp = n_pred = n_gold = 0
    for k, (p, g) in enumerate(zip(pred, gold)):
        if len(p) != len(g):
            raise ValueError(f"utterance {k}: {len(p)} predicted tags for {len(g)} gold")
        ps: Set[Span] = set(spans(p))
        gs: Set[Span] = set(spans(g))
        tp += len(ps & gs)
        n_pred += len(ps)
        n_gold += len(gs)
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """Unsmoothed sentence BLEU against a single reference.

    Candidates shorter than ``max_n`` use precisions up to their own length.
    """
    if not reference:
        raise ValueError("empty reference")
    c = len(candidate)
    if c == 0:
        return 0.0
    order = min(max_n, c)
    log_sum = 0.0
    for n in range(1, order + 1):
        cand = _ngrams(candidate, n)
        ref = _ngrams(reference, n)
        clipped = sum(min(k, ref[g]) for g, k in cand.items())
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / sum(cand.values()))
    r = len(reference)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / order)
