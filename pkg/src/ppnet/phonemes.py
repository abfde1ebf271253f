"""Class inventory: consonants, then vowels, then a single silence class."""

from __future__ import annotations

# Consonants in inventory order; the 23rd (glottal stop) completes the 30-class layout.
CONSONANTS = (
    "p", "b", "t", "d", "tʃ", "dʒ", "k", "g", "f", "v", "kh", "s",
    "z", "ʃ", "ʒ", "m", "n", "h", "l", "r", "q", "y", "ʔ",
)
VOWELS = ("A", "i", "u", "æ", "e", "o")
SILENCE = "sil"


def class_names(n_consonants: int = len(CONSONANTS), n_vowels: int = len(VOWELS)) -> list[str]:
    if not 1 <= n_consonants <= len(CONSONANTS) or not 1 <= n_vowels <= len(VOWELS):
        raise ValueError(f"inventory holds {len(CONSONANTS)} consonants and {len(VOWELS)} vowels")
    return [*CONSONANTS[:n_consonants], *VOWELS[:n_vowels], SILENCE]


def consonant_label(c: int) -> int:
    return c


def vowel_label(v: int, n_consonants: int = len(CONSONANTS)) -> int:
    return n_consonants + v


def silence_label(n_consonants: int = len(CONSONANTS), n_vowels: int = len(VOWELS)) -> int:
    return n_consonants + n_vowels
