import os

import pytest
from hypothesis import HealthCheck, settings

from paraslu.corpus import Corpus, make_utterance

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FLIGHT = ("i need a flight from chicago to san francisco on a thursday",
          "O O O O O B-fromloc.city_name O B-toloc.city_name I-toloc.city_name O O B-depart_date.day_name",
          "atis_flight")


def corpus_of(*records):
    return Corpus(tuple(make_utterance(*r) for r in records))


@pytest.fixture
def toy_corpus():
    return corpus_of(
        FLIGHT,
        ("show me flights from boston to denver on monday",
         "O O O O B-fromloc.city_name O B-toloc.city_name O B-depart_date.day_name", "atis_flight"),
        ("what is the fare from dallas to atlanta",
         "O O O O O B-fromloc.city_name O B-toloc.city_name", "atis_airfare"),
        ("list airlines", "O O", "atis_airline"),
    )


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])
