"""Paraphrase-augmented joint intent detection and slot filling."""

from .config import ConfigError, Hyper, RunConfig
from .corpus import Corpus, CorpusError, LabeledUtterance, Vocabulary, load_corpus
from .parser import Parse, ParserModel, train_parser
from .pipeline import HybridParser, VotedParse, hybrid_parse

__all__ = [
    "ConfigError", "Corpus", "CorpusError", "Hyper", "HybridParser", "LabeledUtterance",
    "Parse", "ParserModel", "RunConfig", "Vocabulary", "VotedParse", "hybrid_parse",
    "load_corpus", "train_parser",
]
