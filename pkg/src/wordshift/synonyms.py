"""Human-curated synonym lexicon with embedding-ranked candidate selection.

The lexicon is a plain TSV mapping (``word<TAB>syn1,syn2,...``), the format a
WordNet extraction script would emit. Candidate ordering comes from cosine
similarity in an embedding store; a replacement is then picked by its
position in that ranking: the most similar, an intermediate one, or the least
similar.
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Sequence, TypeVar

from ._util import SkipWord
from .embedding import EmbeddingStore, OutOfVocabularyError, ScoredWord, cosine

__all__ = [
    "ReplacementPosition",
    "SynonymLexicon",
    "load_lexicon",
    "rank_synonyms",
    "select_by_position",
]

T = TypeVar("T")


class ReplacementPosition(str, Enum):
    """Which entry of a descending-similarity ranking to pick."""

    MIN = "min"
    MID = "mid"
    HIGH = "high"


class SynonymLexicon:
    """Case-insensitive word -> ordered synonym list.

    Entries are deduplicated, a word is never its own synonym, and synonyms
    containing whitespace (multi-word expressions) are dropped since they can
    never be a single replacement token.
    """

    def __init__(self, entries: dict[str, Sequence[str]]):
        mapping: dict[str, tuple[str, ...]] = {}
        for word, syns in entries.items():
            key = word.lower()
            seen: set[str] = set()
            kept: list[str] = []
            for syn in syns:
                s = syn.lower()
                if not s or s == key or s in seen or any(ch.isspace() for ch in s):
                    continue
                seen.add(s)
                kept.append(s)
            mapping[key] = tuple(kept)
        self._mapping = mapping

    def __len__(self) -> int:
        return len(self._mapping)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._mapping

    def words(self) -> list[str]:
        return sorted(self._mapping)

    def synonyms(self, word: str) -> tuple[str, ...]:
        return self._mapping.get(word.lower(), ())


def load_lexicon(path: str | Path) -> SynonymLexicon:
    """Parse a TSV lexicon: one ``word<TAB>syn1,syn2,...`` entry per line.

    Blank lines and ``#`` comments are skipped; anything else malformed
    raises with the line number.
    """
    entries: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 2:
                raise ValueError(
                    f"line {lineno}: expected 'word<TAB>synonyms', got {len(parts)} fields"
                )
            word, syn_field = parts
            if not word.strip():
                raise ValueError(f"line {lineno}: empty word")
            syns = [s.strip() for s in syn_field.split(",") if s.strip()]
            entries.setdefault(word.strip(), []).extend(syns)
    return SynonymLexicon(entries)


def rank_synonyms(
    lexicon: SynonymLexicon, store: EmbeddingStore, target: str
) -> list[ScoredWord]:
    """Synonyms of ``target`` ordered by descending cosine similarity.

    Synonyms missing from the embedding vocabulary are dropped; ties keep
    lexicon order. Raises SkipWord when the target has no lexicon entry or no
    vector, which callers treat as "leave this token alone".
    """
    if target.lower() not in lexicon:
        raise SkipWord(f"{target!r} has no lexicon entry")
    try:
        target_vec = store.vector_of(target.lower())
    except OutOfVocabularyError:
        raise SkipWord(f"{target!r} has no embedding vector") from None
    scored = []
    for pos, syn in enumerate(lexicon.synonyms(target)):
        if syn not in store:
            continue
        scored.append((pos, ScoredWord(syn, cosine(target_vec, store.vector_of(syn)))))
    scored.sort(key=lambda item: (-item[1].score, item[0]))
    return [sw for _, sw in scored]


def select_by_position(ranked: Sequence[T], position: ReplacementPosition) -> T:
    """Pick an entry from a descending-similarity ranking.

    HIGH is the most similar (first), MIN the least similar (last), and MID
    the lower-middle element at index ``(len - 1) // 2``.
    """
    if len(ranked) == 0:
        raise SkipWord("empty candidate ranking")
    if position is ReplacementPosition.HIGH:
        return ranked[0]
    if position is ReplacementPosition.MIN:
        return ranked[-1]
    if position is ReplacementPosition.MID:
        return ranked[(len(ranked) - 1) // 2]
    raise ValueError(f"unknown position {position!r}")
