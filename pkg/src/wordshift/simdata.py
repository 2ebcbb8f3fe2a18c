"""Seeded synthetic corpora for desk-scale experiments, tests, and demos.

The generator defines a small artificial language: the vocabulary is split
into groups of near-interchangeable words ("synonym" groups), and text is a
group-level Markov walk whose successor distribution mixes a two-group base
with a three-group adjustment. An order-3 word model trained on samples can
therefore fit the base but never the adjustment, leaving a controllable gap
between genuine samples of the language and text generated by the trained
model; that gap is what zero-shot detectors are supposed to pick up.

Everything is derived from one seed via stable hashing, so corpora are
reproducible across runs and machines without shipping data files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import derive_seed
from .corpus import Document, Label
from .synonyms import SynonymLexicon

__all__ = ["SyntheticLanguage", "make_language", "make_documents", "make_lexicon"]

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _pseudo_words(count: int, seed: int) -> list[str]:
    """Distinct pronounceable lowercase words (3 consonant-vowel syllables)."""
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    rng = np.random.default_rng(derive_seed(seed, "words"))
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        parts = rng.integers(0, len(syllables), size=3)
        word = "".join(syllables[int(p)] for p in parts)
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


@dataclass
class SyntheticLanguage:
    """Group-structured Markov language with lazily derived transitions."""

    seed: int
    n_groups: int = 60
    group_size: int = 4
    branching: int = 6
    context: int = 3
    blend: float = 0.35
    groups: tuple[tuple[str, ...], ...] = field(init=False)
    emission: np.ndarray = field(init=False)
    _cache: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        words = _pseudo_words(self.n_groups * self.group_size, self.seed)
        self.groups = tuple(
            tuple(words[g * self.group_size : (g + 1) * self.group_size])
            for g in range(self.n_groups)
        )
        weights = 1.0 / (1.0 + np.arange(self.group_size))
        self.emission = weights / weights.sum()

    def words(self) -> list[str]:
        return [w for group in self.groups for w in group]

    def _sparse_dist(self, *key) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(derive_seed(self.seed, *key))
        ids = rng.choice(self.n_groups, size=self.branching, replace=False)
        probs = rng.dirichlet(np.full(self.branching, 0.8))
        return ids, probs

    def successor_distribution(self, ctx: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        """Next-group distribution: 2-group base blended with a 3-group tweak."""
        hit = self._cache.get(ctx)
        if hit is not None:
            return hit
        base_ids, base_p = self._sparse_dist("base", *ctx[-2:])
        tweak_ids, tweak_p = self._sparse_dist("tweak", *ctx[-self.context :])
        combined: dict[int, float] = {}
        for gid, p in zip(base_ids, base_p):
            combined[int(gid)] = combined.get(int(gid), 0.0) + (1.0 - self.blend) * float(p)
        for gid, p in zip(tweak_ids, tweak_p):
            combined[int(gid)] = combined.get(int(gid), 0.0) + self.blend * float(p)
        ids = np.array(sorted(combined), dtype=np.int64)
        probs = np.array([combined[int(g)] for g in ids])
        result = (ids, probs / probs.sum())
        self._cache[ctx] = result
        return result

    def sample_words(self, rng: np.random.Generator, length: int) -> list[str]:
        ctx = tuple(int(g) for g in rng.integers(0, self.n_groups, size=self.context))
        out: list[str] = []
        for _ in range(length):
            ids, probs = self.successor_distribution(ctx)
            group = int(ids[rng.choice(len(ids), p=probs)])
            member = int(rng.choice(self.group_size, p=self.emission))
            out.append(self.groups[group][member])
            ctx = ctx[1:] + (group,)
        return out


def make_language(seed: int = 0, **kwargs) -> SyntheticLanguage:
    return SyntheticLanguage(seed=seed, **kwargs)


def make_documents(
    lang: SyntheticLanguage,
    count: int,
    length: int,
    seed: int,
    id_prefix: str = "doc",
) -> list[Document]:
    """Sample ``count`` documents of ``length`` words from the true process."""
    docs = []
    for i in range(count):
        rng = np.random.default_rng(derive_seed(seed, id_prefix, i))
        words = lang.sample_words(rng, length)
        docs.append(
            Document.from_text(id=f"{id_prefix}-{i:05d}", text=" ".join(words), label=Label.HUMAN)
        )
    return docs


def make_lexicon(lang: SyntheticLanguage, distractors: int = 2) -> SynonymLexicon:
    """Synonym lexicon aligned with the language's groups.

    Each word's entry lists its group siblings (genuinely interchangeable)
    followed by a couple of words from a distant group: plausible-looking
    "loose synonyms" that a cosine ranking will put at the bottom.
    """
    entries: dict[str, list[str]] = {}
    for g, group in enumerate(lang.groups):
        far = lang.groups[(g + lang.n_groups // 2) % lang.n_groups]
        for word in group:
            siblings = [w for w in group if w != word]
            entries[word] = siblings + list(far[:distractors])
    return SynonymLexicon(entries)
