"""Controlled attribute vocabulary for the synthetic world.

Categories carry synonyms, a one-line definition and a nominal box size in
normalized scene units; colors and actions are flat word lists.  Everything
downstream (token producers, annotation export, the prompt-matching oracle)
works from this one table.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Category:
    name: str
    synonyms: tuple
    definition: str
    size: tuple  # (width, height), normalized


CATEGORIES = (
    Category("person", ("man", "woman", "human", "pedestrian", "child"), "a human being", (0.20, 0.30)),
    Category("car", ("auto", "automobile", "sedan"), "a motor vehicle with four wheels", (0.32, 0.20)),
    Category("dog", ("puppy", "hound", "canine"), "a domesticated carnivorous mammal", (0.22, 0.20)),
    Category("ball", ("sphere", "orb"), "a round object used in games", (0.20, 0.20)),
    Category("bus", ("autobus", "coach", "omnibus"), "a vehicle carrying many passengers", (0.36, 0.24)),
    Category("bicycle", ("bike", "cycle"), "a vehicle with two wheels propelled by pedals", (0.26, 0.20)),
)

COLORS = ("red", "blue", "green", "yellow", "white", "black")

ACTIONS = ("moving", "waiting", "running", "rolling")

FUNCTION_WORDS = ("a", "the", "on", "in", "and", "is", "with", "of")

CATEGORY_NAMES = tuple(c.name for c in CATEGORIES)

CATEGORY_BY_NAME = {c.name: c for c in CATEGORIES}

# Synonyms resolve to their category name for prompt matching.
SYNONYM_TO_CATEGORY = {syn: c.name for c in CATEGORIES for syn in c.synonyms}


def all_words() -> tuple:
    """Every word the controlled vocabulary knows, in stable order."""
    words = []
    for c in CATEGORIES:
        words.append(c.name)
        words.extend(c.synonyms)
    words.extend(COLORS)
    words.extend(ACTIONS)
    words.extend(FUNCTION_WORDS)
    return tuple(dict.fromkeys(words))


def resolve_category(word: str):
    """Map a word to a category name via names or synonyms, else None."""
    if word in CATEGORY_BY_NAME:
        return word
    return SYNONYM_TO_CATEGORY.get(word)
