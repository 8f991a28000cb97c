"""Labeled utterances, corpus loading, vocabularies and subsampling."""
from __future__ import annotations

import hashlib
import os
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

PAD, BOS, EOS, UNK, BLANK = "<pad>", "<s>", "</s>", "<unk>", "<?>"
RESERVED = (PAD, BOS, EOS, UNK, BLANK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID, BLANK_ID = range(5)


class CorpusError(ValueError):
    pass


def normalize(token: str) -> str:
    return token.lower()


@dataclass(frozen=True)
class LabeledUtterance:
    tokens: Tuple[str, ...]
    tags: Tuple[str, ...]
    intent: str

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if not self.tokens:
            raise CorpusError("utterance has no tokens")
        if len(self.tokens) != len(self.tags):
            raise CorpusError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        if not self.intent:
            raise CorpusError("empty intent label")
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise CorpusError(f"invalid token {tok!r}")

    def to_tsv(self) -> str:
        return f"{' '.join(self.tokens)}\t{' '.join(self.tags)}\t{self.intent}"


@dataclass(frozen=True)
class Corpus:
    utterances: Tuple[LabeledUtterance, ...]
    intent_set: frozenset = field(init=False)
    slot_set: frozenset = field(init=False)
    word_set: frozenset = field(init=False)

    def __post_init__(self):
        utts = tuple(self.utterances)
        object.__setattr__(self, "utterances", utts)
        object.__setattr__(self, "intent_set", frozenset(u.intent for u in utts))
        object.__setattr__(
            self, "slot_set", frozenset(t for u in utts for t in u.tags)
        )
        object.__setattr__(
            self, "word_set", frozenset(t for u in utts for t in u.tokens)
        )

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def __getitem__(self, i):
        return self.utterances[i]


def make_utterance(text: str, tags: str, intent: str) -> LabeledUtterance:
    """Build an utterance from whitespace-separated token and tag strings."""
    return LabeledUtterance(
        tuple(normalize(t) for t in text.split()), tuple(tags.split()), intent.strip()
    )


def _parse_record(text: str, tags: str, intent: str, where: str) -> LabeledUtterance:
    toks = text.split()
    tag_list = tags.split()
    if len(toks) != len(tag_list):
        raise CorpusError(
            f"{where}: {len(toks)} tokens but {len(tag_list)} tags"
        )
    try:
        return make_utterance(text, tags, intent)
    except CorpusError as exc:
        raise CorpusError(f"{where}: {exc}") from None


def _read_lines(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\r\n") for line in f]


def load_tsv(path: str) -> Corpus:
    utts = []
    for lineno, line in enumerate(_read_lines(path), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CorpusError(
                f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
            )
        utts.append(_parse_record(*parts, where=f"{path}:{lineno}"))
    if not utts:
        raise CorpusError(f"{path}: empty corpus")
    return Corpus(tuple(utts))


def load_parallel(directory: str) -> Corpus:
    """Load the ``seq.in`` / ``seq.out`` / ``label`` layout of public ATIS dumps."""
    texts = _read_lines(os.path.join(directory, "seq.in"))
    tags = _read_lines(os.path.join(directory, "seq.out"))
    labels = _read_lines(os.path.join(directory, "label"))
    if not (len(texts) == len(tags) == len(labels)):
        raise CorpusError(
            f"{directory}: parallel files have {len(texts)}/{len(tags)}/{len(labels)} lines"
        )
    utts = []
    for lineno, (x, y, i) in enumerate(zip(texts, tags, labels), 1):
        if not x.strip() and not y.strip() and not i.strip():
            continue
        utts.append(_parse_record(x, y, i, where=f"{directory}/seq.in:{lineno}"))
    if not utts:
        raise CorpusError(f"{directory}: empty corpus")
    return Corpus(tuple(utts))


def load_corpus(path: str, format: str = "tsv") -> Corpus:
    if format == "tsv":
        return load_tsv(path)
    if format in ("parallel", "parallel-files"):
        return load_parallel(path)
    raise CorpusError(f"unknown corpus format {format!r}")


def save_tsv(utterances: Iterable[LabeledUtterance], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for u in utterances:
            f.write(u.to_tsv() + "\n")


class Vocabulary:
    """Token <-> id mapping with the five reserved ids first."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[: len(RESERVED)] != RESERVED:
            raise CorpusError("vocabulary must start with the reserved tokens")
        if len(set(tokens)) != len(tokens):
            raise CorpusError("duplicate vocabulary entries")
        self._itos = tokens
        self._stoi = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self._itos)

    def __contains__(self, token: str) -> bool:
        return token in self._stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._itos == other._itos

    def __hash__(self):
        return hash(self._itos)

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self._itos

    def id(self, token: str) -> int:
        return self._stoi.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self._itos[idx]

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self._itos).encode("utf-8")).hexdigest()


def build_vocab(corpus: Corpus | Iterable[Sequence[str]], min_freq: int = 1) -> Vocabulary:
    """Reserved tokens, then corpus tokens by descending count, ties lexicographic.

    Accepts a :class:`Corpus` or any iterable of token sequences.
    """
    if min_freq < 1:
        raise CorpusError("min_freq must be >= 1")
    seqs = (u.tokens for u in corpus) if isinstance(corpus, Corpus) else corpus
    counts = Counter(t for seq in seqs for t in seq)
    for r in RESERVED:
        counts.pop(r, None)
    kept = sorted((t for t, c in counts.items() if c >= min_freq),
                  key=lambda t: (-counts[t], t))
    return Vocabulary(RESERVED + tuple(kept))


def encode(tokens: Sequence[str], vocab: Vocabulary) -> List[int]:
    return [vocab.id(t) for t in tokens]


def decode(ids: Sequence[int], vocab: Vocabulary) -> List[str]:
    return [vocab.token(i) for i in ids]


def subsample(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Sample ``n`` utterances without replacement, in original corpus order."""
    if not 1 <= n <= len(corpus):
        raise CorpusError(f"cannot sample {n} of {len(corpus)} utterances")
    rng = random.Random(seed)
    idx = sorted(rng.sample(range(len(corpus)), n))
    return Corpus(tuple(corpus.utterances[i] for i in idx))
