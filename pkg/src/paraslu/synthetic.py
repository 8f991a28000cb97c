"""A small built-in airline-domain grammar for desk-scale experiments.

Every intent has 14 sentence templates. ``{slot}`` placeholders are filled
with values from :data:`VALUES` and tagged BIO-style; all other words are
tagged ``O``. Held-out templates are only ever used for the test split.
"""
from __future__ import annotations

import random
from collections import defaultdict
from typing import Dict, List, Tuple

from .corpus import Corpus, CorpusError, LabeledUtterance

LABELS = {
    "from": "fromloc.city_name",
    "to": "toloc.city_name",
    "day": "depart_date.day_name",
    "airline": "airline_name",
    "class": "class_type",
    "period": "depart_time.period_of_day",
    "transport": "transport_type",
    "city": "city_name",
}

_CITIES = ["boston", "denver", "atlanta", "dallas", "pittsburgh", "baltimore", "chicago",
           "san francisco", "new york", "salt lake city", "philadelphia", "oakland",
           "long beach", "tacoma", "washington", "las vegas"]

VALUES: Dict[str, List[str]] = {
    "from": _CITIES,
    "to": _CITIES,
    "city": _CITIES,
    "day": ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"],
    "airline": ["american airlines", "delta", "united", "continental", "us air", "northwest"],
    "class": ["first class", "economy", "business class", "coach"],
    "period": ["morning", "afternoon", "evening", "night"],
    "transport": ["limousine", "rental car", "taxi", "bus", "air taxi"],
}

# The last templates of each list are the most unusual phrasings.
GRAMMAR: Dict[str, List[str]] = {
    "atis_flight": [
        "show me flights from {from} to {to}",
        "i need a flight from {from} to {to} on {day}",
        "list flights from {from} to {to} on {airline}",
        "what flights go from {from} to {to} in the {period}",
        "i want to fly from {from} to {to}",
        "find me a flight from {from} to {to} on {day}",
        "are there any flights from {from} to {to} on {airline}",
        "show flights leaving {from} for {to} on {day} {period}",
        "i would like to book a flight from {from} to {to}",
        "please give me flights from {from} to {to} on {day}",
        "which flights depart {from} and arrive in {to}",
        "display all flights between {from} and {to} in the {period}",
        "get me from {from} to {to} on {day}",
        "is there a way to travel by plane from {from} to {to}",
    ],
    "atis_airfare": [
        "show me fares from {from} to {to}",
        "how much is a {class} ticket from {from} to {to}",
        "what is the cheapest fare from {from} to {to}",
        "list the fares for {airline} from {from} to {to}",
        "what does it cost to fly from {from} to {to} on {day}",
        "give me the price of a {class} ticket from {from} to {to}",
        "how much does a flight from {from} to {to} cost",
        "what are the round trip fares from {from} to {to}",
        "i need fare information from {from} to {to} on {airline}",
        "show me the lowest fare from {from} to {to} on {day}",
        "what is the price from {from} to {to} in {class}",
        "fares please from {from} to {to}",
        "how expensive is it to go from {from} to {to}",
        "what would i pay for a seat from {from} to {to} on {day}",
    ],
    "atis_ground_service": [
        "what ground transportation is available in {city}",
        "show me ground transportation in {city}",
        "is there a {transport} in {city}",
        "how do i get downtown in {city}",
        "what kind of ground service is there in {city}",
        "i need a {transport} at the {city} airport",
        "list ground transportation for {city}",
        "can i get a {transport} from the airport in {city}",
        "what transportation is there from the {city} airport to downtown",
        "show me {transport} service in {city}",
        "where can i find a {transport} in {city}",
        "ground transportation in {city} please",
        "how can i get into town once i land in {city}",
        "any way to reach the city center from {city} airport by {transport}",
    ],
    "atis_airline": [
        "which airlines fly from {from} to {to}",
        "what airlines go from {from} to {to}",
        "show me the airlines between {from} and {to}",
        "list airlines serving {from} and {to}",
        "which airline has flights from {from} to {to} on {day}",
        "what carriers fly from {from} to {to}",
        "tell me which airlines leave {from} for {to}",
        "what airlines have {class} from {from} to {to}",
        "show airlines with flights from {from} to {to} in the {period}",
        "which companies operate between {from} and {to}",
        "i want to know the airlines from {from} to {to}",
        "airlines from {from} to {to} please",
        "who flies the route from {from} to {to}",
        "name the carriers that connect {from} with {to} on {day}",
    ],
}


def template_signature(template: str) -> Tuple[str, ...]:
    return tuple(sorted(LABELS[w[1:-1]] for w in template.split() if w.startswith("{")))


def realize(template: str, intent: str, rng: random.Random) -> LabeledUtterance:
    toks, tags = [], []
    used = set()
    for w in template.split():
        if w.startswith("{") and w.endswith("}"):
            slot = w[1:-1]
            choices = [v for v in VALUES[slot] if v not in used] or VALUES[slot]
            value = rng.choice(choices)
            used.add(value)
            words = value.split()
            toks.extend(words)
            tags.extend(["B-" + LABELS[slot]] + ["I-" + LABELS[slot]] * (len(words) - 1))
        else:
            toks.append(w)
            tags.append("O")
    return LabeledUtterance(tuple(toks), tuple(tags), intent)


def split_templates(seed: int, holdout: int) -> Tuple[Dict[str, List[str]], Dict[str, List[str]]]:
    """Choose ``holdout`` test-only templates per intent.

    A template is only held out if another template of its intent with the
    same slot signature stays in training.
    """
    rng = random.Random(seed)
    train, held = {}, {}
    for intent in sorted(GRAMMAR):
        templates = GRAMMAR[intent]
        if holdout > len(templates) - 1:
            raise CorpusError(f"cannot hold out {holdout} of {len(templates)} templates for {intent}")
        order = list(range(len(templates)))
        rng.shuffle(order)
        remaining = defaultdict(int)
        for t in templates:
            remaining[template_signature(t)] += 1
        chosen = []
        for i in order:
            if len(chosen) == holdout:
                break
            sig = template_signature(templates[i])
            if remaining[sig] > 1:
                remaining[sig] -= 1
                chosen.append(i)
        if len(chosen) < holdout:
            raise CorpusError(f"not enough templates with shared slot signatures for {intent}")
        held[intent] = [templates[i] for i in sorted(chosen)]
        train[intent] = [t for i, t in enumerate(templates) if i not in chosen]
    return train, held


def _draw(pools: Dict[str, List[str]], n: int, rng: random.Random) -> List[LabeledUtterance]:
    flat = [(intent, t) for intent in sorted(pools) for t in pools[intent]]
    out = []
    order: List[int] = []
    for _ in range(n):
        if not order:
            order = list(range(len(flat)))
            rng.shuffle(order)
        intent, t = flat[order.pop()]
        out.append(realize(t, intent, rng))
    return out


def gen_synthetic(grammar_seed: int, n_train: int, n_test: int,
                  holdout_templates: int = 0, heldout_share: float = 0.5) -> Tuple[Corpus, Corpus]:
    """Train and test corpora from the built-in grammar.

    Training cycles through every non-held-out template before repeating one.
    With held-out templates, ``heldout_share`` of the test set is drawn from
    them and the rest from the training templates.
    """
    if n_train < 1 or n_test < 1:
        raise CorpusError("n_train and n_test must be >= 1")
    train_t, held_t = split_templates(grammar_seed, holdout_templates)
    rng = random.Random(grammar_seed)
    train = _draw(train_t, n_train, rng)
    if holdout_templates:
        n_held = int(round(n_test * heldout_share))
        test = _draw(held_t, n_held, rng) + _draw(train_t, n_test - n_held, rng)
    else:
        test = _draw(train_t, n_test, rng)
    return Corpus(tuple(train)), Corpus(tuple(test))
