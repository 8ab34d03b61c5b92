"""Flesch-Kincaid grade level, used to keep all lesson text age-appropriate.

grade = 0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59

Tokenization is deliberately simple and fully specified so results are
stable: sentences end at runs of ``.!?`` followed by whitespace or the end
of the text; words are whitespace-separated tokens stripped of surrounding
punctuation. Syllables are counted as maximal vowel groups (a, e, i, o, u,
y), minus one for a terminal silent "e" (kept when the word ends in "le"),
with a minimum of one per word.
"""

from __future__ import annotations

import re

_SENTENCE_SPLIT = re.compile(r"[.!?]+(?:\s+|$)")
_VOWEL_GROUPS = re.compile(r"[aeiouy]+")

DEFAULT_MAX_GRADE = 8.0


class InvalidText(ValueError):
    """No sentences or no words to score."""


def split_sentences(text: str) -> list[str]:
    return [part.strip() for part in _SENTENCE_SPLIT.split(text) if part.strip()]


def split_words(text: str) -> list[str]:
    words = []
    for token in text.split():
        word = token.strip(".,;:!?\"'()[]{}<>*_-")
        if word:
            words.append(word)
    return words


def count_syllables(word: str) -> int:
    """Vowel-group heuristic; never less than one syllable per word."""
    lowered = word.lower()
    count = len(_VOWEL_GROUPS.findall(lowered))
    if lowered.endswith("e") and not lowered.endswith("le"):
        count -= 1
    return max(count, 1)


def readability_grade(text: str) -> float:
    """Flesch-Kincaid grade level of the text."""
    sentences = split_sentences(text)
    words = [word for sentence in sentences for word in split_words(sentence)]
    if not sentences or not words:
        raise InvalidText("text needs at least one sentence and one word")
    syllables = sum(count_syllables(word) for word in words)
    return 0.39 * (len(words) / len(sentences)) + 11.8 * (syllables / len(words)) - 15.59
