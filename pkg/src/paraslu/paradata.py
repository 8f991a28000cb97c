"""Paraphrase training pairs from tagged-utterance equivalence, and slot recombination."""
from __future__ import annotations

import logging
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from .corpus import Corpus, CorpusError, LabeledUtterance, normalize

log = logging.getLogger(__name__)

OUTSIDE = "O"


def slot_label(tag: str) -> str:
    """Strip a BIO prefix; bare labels are returned unchanged."""
    if len(tag) > 2 and tag[1] == "-" and tag[0] in "BI":
        return tag[2:]
    return tag


def label_token(label: str) -> str:
    return label if label.startswith("@") else "@" + label


@dataclass(frozen=True)
class Filler:
    label: str
    tokens: Tuple[str, ...]
    tags: Tuple[str, ...]


@dataclass(frozen=True)
class TaggedUtterance:
    tokens: Tuple[str, ...]
    intent: str
    fillers: Tuple[Filler, ...]
    parent: int = -1

    @property
    def key(self) -> Tuple[str, Tuple[str, ...]]:
        return self.intent, tuple(sorted(f.label for f in self.fillers))

    def detag(self, fillers: Sequence[Filler] | None = None) -> Tuple[List[str], List[str]]:
        """Substitute fillers back, matching same-label fillers in order of appearance.

        Returns (tokens, tags). Raises CorpusError if ``fillers`` cannot cover
        every slot-label token.
        """
        fillers = self.fillers if fillers is None else fillers
        queues: Dict[str, List[Filler]] = defaultdict(list)
        for f in fillers:
            queues[label_token(f.label)].append(f)
        slot_tokens = {label_token(f.label) for f in self.fillers}
        toks: List[str] = []
        tags: List[str] = []
        for tok in self.tokens:
            if tok in slot_tokens:
                if not queues[tok]:
                    raise CorpusError(f"no filler left for {tok}")
                f = queues[tok].pop(0)
                toks.extend(f.tokens)
                tags.extend(f.tags)
            else:
                toks.append(tok)
                tags.append(OUTSIDE)
        return toks, tags


def tag_utterance(u: LabeledUtterance, parent: int = -1) -> TaggedUtterance:
    toks: List[str] = []
    fillers: List[Filler] = []
    i, n = 0, len(u.tokens)
    while i < n:
        label = slot_label(u.tags[i])
        if label == OUTSIDE:
            toks.append(u.tokens[i])
            i += 1
            continue
        j = i + 1
        while j < n and slot_label(u.tags[j]) == label:
            j += 1
        fillers.append(Filler(label, u.tokens[i:j], u.tags[i:j]))
        toks.append(label_token(label))
        i = j
    return TaggedUtterance(tuple(toks), u.intent, tuple(fillers), parent)


@dataclass(frozen=True)
class ParaphrasePair:
    source: Tuple[str, ...]
    target: Tuple[str, ...]
    kind: str = "cross"
    intent: str = ""
    source_tags: Tuple[str, ...] = ()
    target_tags: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.source or not self.target:
            raise CorpusError("paraphrase pair sides must be non-empty")
        if self.kind not in ("cross", "identity"):
            raise CorpusError(f"unknown pair kind {self.kind!r}")
        if self.kind == "identity" and self.source != self.target:
            raise CorpusError("identity pair with differing sides")


def cross_pairs(tagged: Sequence[TaggedUtterance], corpus: Corpus) -> List[ParaphrasePair]:
    groups: Dict[tuple, List[int]] = defaultdict(list)
    for i, z in enumerate(tagged):
        groups[z.key].append(i)
    pairs = []
    for key in sorted(groups):
        members = groups[key]
        for i in members:
            z = tagged[i]
            parent = corpus[z.parent if z.parent >= 0 else i]
            for j in members:
                zp = tagged[j]
                if i == j or z.tokens == zp.tokens:
                    continue
                try:
                    target, target_tags = zp.detag(z.fillers)
                except CorpusError as exc:
                    log.warning("skipping pair (%d, %d): %s", i, j, exc)
                    continue
                pairs.append((i, j, ParaphrasePair(
                    parent.tokens, tuple(target), "cross", parent.intent,
                    parent.tags, tuple(target_tags))))
    pairs.sort(key=lambda p: (p[0], p[1]))
    return [p for _, _, p in pairs]


def build_paraphrase_dataset(corpus: Corpus) -> List[ParaphrasePair]:
    """Cross pairs within (intent, slot-label multiset) groups, then one identity pair per utterance.

    Cross pairs are directed and ordered by (source index, target index).
    Duplicate surface pairs are kept.
    """
    if len(corpus) == 0:
        raise CorpusError("empty corpus")
    tagged = [tag_utterance(u, i) for i, u in enumerate(corpus)]
    pairs = cross_pairs(tagged, corpus)
    pairs.extend(
        ParaphrasePair(u.tokens, u.tokens, "identity", u.intent, u.tags, u.tags)
        for u in corpus
    )
    return pairs


def save_pairs(pairs: Sequence[ParaphrasePair], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(f"{' '.join(p.source)}\t{' '.join(p.target)}\n")


def load_pairs(path: str) -> List[ParaphrasePair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 2 tab-separated fields")
            src = tuple(normalize(t) for t in parts[0].split())
            tgt = tuple(normalize(t) for t in parts[1].split())
            if not src or not tgt:
                raise CorpusError(f"{path}:{lineno}: empty side")
            pairs.append(ParaphrasePair(src, tgt, "identity" if src == tgt else "cross"))
    if not pairs:
        raise CorpusError(f"{path}: no pairs")
    return pairs


def recombine(corpus: Corpus, n: int, seed: int) -> List[LabeledUtterance]:
    """Sample utterances and swap each slot span for another observed span of the same label.

    A label with a single observed surface form keeps its original filler.
    """
    if len(corpus) < 2:
        raise CorpusError("recombination needs at least 2 utterances")
    tagged = [tag_utterance(u, i) for i, u in enumerate(corpus)]
    pool: Dict[str, List[Filler]] = defaultdict(list)
    for z in tagged:
        for f in z.fillers:
            pool[f.label].append(f)
    # distinct surfaces, canonical order
    pool = {lab: sorted(set(fs), key=lambda f: (f.tokens, f.tags)) for lab, fs in pool.items()}

    rng = random.Random(seed)
    out = []
    for _ in range(n):
        z = tagged[rng.randrange(len(tagged))]
        new = []
        for f in z.fillers:
            options = [g for g in pool[f.label] if g.tokens != f.tokens]
            new.append(rng.choice(options) if options else f)
        toks, tags = z.detag(new)
        out.append(LabeledUtterance(tuple(toks), tuple(tags), z.intent))
    return out
