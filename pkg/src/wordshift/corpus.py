"""Dataset ingestion, tokenization, vocabulary construction, and Boolean encoding.

Documents are tokenized into word/punctuation tokens with the inter-token
whitespace preserved, so a token sequence can always be re-rendered into the
exact original string. The Boolean bag-of-words encoding (one presence column
plus one negation column per vocabulary word) is what the Tsetlin machine
trains on; word frequency within a document is deliberately ignored.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

__all__ = [
    "Label",
    "Token",
    "TokenSequence",
    "Document",
    "Vocabulary",
    "CorpusFormatError",
    "tokenize",
    "detokenize",
    "build_vocab",
    "encode_presence",
    "BooleanEncoder",
    "load_jsonl",
    "save_jsonl",
    "document_to_json",
]

# Word tokens are maximal alphanumeric runs; any other non-space character is
# a single-character token. Whitespace is never a token: it lands in the
# separator slots of the TokenSequence.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

STOP_PUNCTUATION = frozenset(string.punctuation)

_MIN_INFORMATIVE_LEN = 2


class Label(str, Enum):
    HUMAN = "human"
    AI = "ai"


@dataclass(frozen=True)
class Token:
    """One surface token plus the lowercase form used for lookups."""

    surface: str
    normalized: str
    informative: bool
    vocab_id: int | None = None


@dataclass(frozen=True)
class TokenSequence:
    """Tokens plus the separator strings around them.

    ``separators`` has ``len(tokens) + 1`` entries: the text before the first
    token, between consecutive tokens, and after the last one. Rendering
    ``separators[0] + tokens[0].surface + separators[1] + ...`` reproduces the
    source text byte for byte.
    """

    tokens: tuple[Token, ...]
    separators: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.separators) != len(self.tokens) + 1:
            raise ValueError(
                f"expected {len(self.tokens) + 1} separators, got {len(self.separators)}"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i: int) -> Token:
        return self.tokens[i]

    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def normalized(self) -> list[str]:
        return [t.normalized for t in self.tokens]

    def informative_indices(self) -> list[int]:
        return [i for i, t in enumerate(self.tokens) if t.informative]

    def with_surface(self, index: int, surface: str) -> "TokenSequence":
        """Copy of the sequence with one token's surface (and lookup form) replaced."""
        tok = self.tokens[index]
        new = replace(tok, surface=surface, normalized=surface.lower())
        tokens = self.tokens[:index] + (new,) + self.tokens[index + 1 :]
        return TokenSequence(tokens, self.separators)

    def render(self) -> str:
        parts = [self.separators[0]]
        for tok, sep in zip(self.tokens, self.separators[1:]):
            parts.append(tok.surface)
            parts.append(sep)
        return "".join(parts)


def tokenize(text: str) -> TokenSequence:
    """Split text into word/punctuation tokens, keeping whitespace as separators.

    A token is informative when it is alphabetic, at least two characters
    long, and not a stop-punctuation entry; only informative tokens are ever
    eligible for replacement or vocabulary membership.
    """
    tokens: list[Token] = []
    separators: list[str] = []
    last = 0
    for m in _TOKEN_RE.finditer(text):
        separators.append(text[last : m.start()])
        surface = m.group()
        informative = (
            surface.isalpha()
            and len(surface) >= _MIN_INFORMATIVE_LEN
            and surface not in STOP_PUNCTUATION
        )
        tokens.append(Token(surface, surface.lower(), informative))
        last = m.end()
    separators.append(text[last:])
    return TokenSequence(tuple(tokens), tuple(separators))


def detokenize(seq: TokenSequence) -> str:
    return seq.render()


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    tokens: TokenSequence
    label: Label | None = None
    source_model: str | None = None

    @classmethod
    def from_text(
        cls,
        id: str,
        text: str,
        label: Label | None = None,
        source_model: str | None = None,
    ) -> "Document":
        return cls(id=id, text=text, tokens=tokenize(text), label=label, source_model=source_model)

    def words(self) -> list[str]:
        return self.tokens.normalized()

    def informative_count(self) -> int:
        return len(self.tokens.informative_indices())


@dataclass(frozen=True)
class Vocabulary:
    """Deterministically ordered word list with O(1) lookup.

    Words are ordered by descending frequency with lexicographic tie-break,
    capped at ``cap`` entries, so two builds over the same token multiset are
    identical.
    """

    words: tuple[str, ...]
    cap: int
    index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            object.__setattr__(self, "index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def id_of(self, word: str) -> int | None:
        return self.index.get(word)


def build_vocab(docs: list[Document], cap: int = 40_000) -> Vocabulary:
    """The ``cap`` most frequent normalized informative tokens across ``docs``."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    counts: Counter[str] = Counter()
    for doc in docs:
        counts.update(t.normalized for t in doc.tokens if t.informative)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(words=tuple(w for w, _ in ordered[:cap]), cap=cap)


def encode_presence(doc: Document, vocab: Vocabulary) -> np.ndarray:
    """One Boolean row: presence column per vocab word, then its negation.

    Column ``j`` is 1 iff vocab word ``j`` occurs at least once in the
    document (frequency is disregarded); column ``j + |V|`` is its complement.
    """
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    size = len(vocab)
    row = np.zeros(2 * size, dtype=np.uint8)
    for tok in doc.tokens:
        idx = vocab.id_of(tok.normalized)
        if idx is not None:
            row[idx] = 1
    row[size:] = 1 - row[:size]
    return row


class BooleanEncoder(BaseEstimator, TransformerMixin):
    """Vectorizer from documents to Boolean presence/negation rows.

    ``fit`` builds the vocabulary (most frequent informative tokens, capped);
    ``transform`` emits one row of ``2 * |vocab|`` columns per document.
    """

    def __init__(self, cap: int = 40_000):
        self.cap = cap

    def fit(self, X: list[Document], y=None) -> "BooleanEncoder":
        self.vocabulary_ = build_vocab(X, cap=self.cap)
        return self

    def transform(self, X: list[Document]) -> np.ndarray:
        if not hasattr(self, "vocabulary_"):
            raise NotFittedError("BooleanEncoder must be fitted before transform")
        if len(self.vocabulary_) == 0:
            raise ValueError("fitted vocabulary is empty")
        return np.stack([encode_presence(doc, self.vocabulary_) for doc in X])


class CorpusFormatError(ValueError):
    """Raised for malformed dataset files, with the offending line number."""


_LABELS = {"human": Label.HUMAN, "ai": Label.AI}


def load_jsonl(path: str | Path) -> list[Document]:
    """Load a JSONL dataset: one object per line with id, text, label.

    ``label`` is matched case-insensitively against {"human", "ai"};
    ``source_model`` is optional. Any malformed line aborts the load with an
    error naming the line.
    """
    docs: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"line {lineno}: expected a JSON object")
            for key in ("id", "text", "label"):
                if key not in obj:
                    raise CorpusFormatError(f"line {lineno}: missing field {key}")
            raw_label = str(obj["label"]).lower()
            if raw_label not in _LABELS:
                raise CorpusFormatError(
                    f"line {lineno}: unknown label {obj['label']!r} (expected human or ai)"
                )
            docs.append(
                Document.from_text(
                    id=str(obj["id"]),
                    text=obj["text"],
                    label=_LABELS[raw_label],
                    source_model=obj.get("source_model"),
                )
            )
    return docs


def document_to_json(doc: Document) -> dict:
    obj: dict = {"id": doc.id, "text": doc.text}
    if doc.label is not None:
        obj["label"] = doc.label.value
    if doc.source_model is not None:
        obj["source_model"] = doc.source_model
    return obj


def save_jsonl(docs: list[Document], path: str | Path, extras: list[dict] | None = None) -> None:
    """Write documents as JSONL; ``extras`` merges extra fields per document."""
    if extras is not None and len(extras) != len(docs):
        raise ValueError("extras must align with docs")
    with open(path, "w", encoding="utf-8") as fh:
        for i, doc in enumerate(docs):
            obj = document_to_json(doc)
            if extras is not None:
                obj.update(extras[i])
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
