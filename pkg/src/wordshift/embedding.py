"""Static word embeddings: text-format store, cosine queries, skip-gram trainer.

The store holds one dense vector per word and answers exact brute-force
nearest-neighbor queries by cosine similarity (desk-scale vocabularies make
approximate search pointless). Training is skip-gram with negative sampling;
the loss/gradient pair is exposed as pure functions so the arithmetic can be
checked against finite differences.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator

from ._util import SkipWord, require_fitted
from .corpus import Document, build_vocab

__all__ = [
    "EmbeddingStore",
    "ScoredWord",
    "OutOfVocabularyError",
    "cosine",
    "load_text_vectors",
    "save_text_vectors",
    "SkipGramEmbedding",
    "sgns_loss",
    "sgns_gradients",
]


class OutOfVocabularyError(SkipWord):
    """The word has no vector; callers treating words as candidates skip it."""


@dataclass(frozen=True)
class ScoredWord:
    word: str
    score: float


class EmbeddingStore:
    """Immutable word -> dense vector table with cosine neighbor queries."""

    def __init__(self, words: tuple[str, ...], vectors: np.ndarray):
        if len(words) != vectors.shape[0]:
            raise ValueError("words and vectors disagree on vocabulary size")
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D matrix")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vectors must be finite")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero vectors are not allowed in an embedding store")
        self.words = tuple(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.vectors = vectors.astype(np.float64, copy=True)
        self.vectors.setflags(write=False)
        self.norms = norms

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def vector_of(self, word: str) -> np.ndarray:
        idx = self.index.get(word)
        if idx is None:
            raise OutOfVocabularyError(word)
        return self.vectors[idx]

    def nearest_neighbors(
        self, target: str, limit: int = 400, min_score: float = 0.0
    ) -> list[ScoredWord]:
        """Top ``limit`` words by cosine similarity to ``target``.

        Entries are sorted by descending similarity (ties broken by
        vocabulary index), filtered to scores >= ``min_score``, and never
        include the target itself.
        """
        if limit < 1:
            raise ValueError(f"limit must be >= 1, got {limit}")
        tid = self.index.get(target)
        if tid is None:
            raise OutOfVocabularyError(target)
        v = self.vectors[tid]
        sims = self.vectors @ v / (self.norms * self.norms[tid])
        order = np.lexsort((np.arange(len(self.words)), -sims))
        out: list[ScoredWord] = []
        for idx in order:
            if idx == tid:
                continue
            score = float(sims[idx])
            if score < min_score:
                break
            out.append(ScoredWord(self.words[idx], score))
            if len(out) == limit:
                break
        return out


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two non-zero vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine is undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def load_text_vectors(path: str | Path) -> EmbeddingStore:
    """Read whitespace-separated text vectors: ``word v1 v2 ... vD`` per line.

    All lines must share the same dimensionality; on duplicate words the
    first occurrence wins.
    """
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise ValueError(f"line {lineno}: no vector components")
            elif len(values) != dim:
                raise ValueError(
                    f"line {lineno}: expected {dim} components, got {len(values)}"
                )
            try:
                vec = np.array([float(x) for x in values], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-numeric vector component") from exc
            if word in seen:
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)
    if not rows:
        raise ValueError("empty embedding file")
    return EmbeddingStore(tuple(words), np.stack(rows))


def save_text_vectors(store: EmbeddingStore, path: str | Path) -> None:
    """Write the store in the same text format (floats via repr, round-trip exact)."""
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in zip(store.words, store.vectors):
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


# -- skip-gram with negative sampling --------------------------------------


def sgns_loss(center: np.ndarray, positive: np.ndarray, negatives: np.ndarray) -> float:
    """Negative-sampling loss for one (center, context, negatives) triple.

    ``-log sigma(u_pos . v) - sum_k log sigma(-u_k . v)`` computed stably.
    """
    pos = float(np.dot(positive, center))
    negs = negatives @ center
    # log sigma(x) == -log(1 + exp(-x)) == -logaddexp(0, -x)
    return float(np.logaddexp(0.0, -pos) + np.logaddexp(0.0, negs).sum())


def sgns_gradients(
    center: np.ndarray, positive: np.ndarray, negatives: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of ``sgns_loss`` w.r.t. center, positive, negatives."""
    g_pos = expit(np.dot(positive, center)) - 1.0
    g_negs = expit(negatives @ center)
    grad_center = g_pos * positive + g_negs @ negatives
    grad_positive = g_pos * center
    grad_negatives = g_negs[:, None] * center[None, :]
    return grad_center, grad_positive, grad_negatives


class SkipGramEmbedding(BaseEstimator):
    """Skip-gram negative-sampling trainer over informative document tokens.

    Single-threaded training (``n_jobs=1``) is bitwise deterministic for a
    fixed seed; ``n_jobs > 1`` trains lock-free over sentence chunks and
    gives up that guarantee.
    """

    def __init__(
        self,
        dim: int = 100,
        window: int = 5,
        negatives: int = 5,
        epochs: int = 5,
        lr: float = 0.05,
        min_lr: float = 0.005,
        cap: int = 40_000,
        seed: int = 0,
        n_jobs: int = 1,
    ):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.lr = lr
        self.min_lr = min_lr
        self.cap = cap
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, docs: list[Document], y=None) -> "SkipGramEmbedding":
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if not docs:
            raise ValueError("cannot train on an empty corpus")
        vocab = build_vocab(docs, cap=self.cap)
        if len(vocab) == 0:
            raise ValueError("corpus has no informative tokens")
        sentences: list[np.ndarray] = []
        freq = np.zeros(len(vocab), dtype=np.float64)
        for doc in docs:
            ids = [
                vocab.index[t.normalized]
                for t in doc.tokens
                if t.informative and t.normalized in vocab.index
            ]
            if len(ids) >= 2:
                arr = np.array(ids, dtype=np.int64)
                sentences.append(arr)
                np.add.at(freq, arr, 1.0)

        noise = freq**0.75
        noise /= noise.sum()
        rng = np.random.default_rng(self.seed)
        n_words = len(vocab)
        w_in = (rng.random((n_words, self.dim)) - 0.5) / self.dim
        w_out = np.zeros((n_words, self.dim))

        total_steps = max(1, self.epochs * len(sentences))
        step = 0
        for _ in range(self.epochs):
            if self.n_jobs > 1:
                self._train_epoch_parallel(sentences, w_in, w_out, noise, rng, step, total_steps)
            else:
                for sent in sentences:
                    lr = self._lr_at(step, total_steps)
                    self._train_sentence(sent, w_in, w_out, noise, rng, lr)
                    step += 1
            step = min(step + (len(sentences) if self.n_jobs > 1 else 0), total_steps)

        self.store_ = EmbeddingStore(vocab.words, w_in)
        return self

    def _lr_at(self, step: int, total: int) -> float:
        frac = step / total
        return self.lr + (self.min_lr - self.lr) * frac

    def _train_sentence(
        self,
        sent: np.ndarray,
        w_in: np.ndarray,
        w_out: np.ndarray,
        noise: np.ndarray,
        rng: np.random.Generator,
        lr: float,
    ) -> None:
        n = len(sent)
        centers: list[int] = []
        contexts: list[int] = []
        for i in range(n):
            lo = max(0, i - self.window)
            hi = min(n, i + self.window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(sent[i])
                    contexts.append(sent[j])
        if not centers:
            return
        c = np.array(centers, dtype=np.int64)
        o = np.array(contexts, dtype=np.int64)
        neg = rng.choice(len(noise), size=(len(c), self.negatives), p=noise)

        vc = w_in[c]
        uo = w_out[o]
        un = w_out[neg]
        g_pos = expit(np.einsum("pd,pd->p", vc, uo)) - 1.0
        g_neg = expit(np.einsum("pkd,pd->pk", un, vc))
        grad_vc = g_pos[:, None] * uo + np.einsum("pk,pkd->pd", g_neg, un)
        grad_uo = g_pos[:, None] * vc
        grad_un = g_neg[:, :, None] * vc[:, None, :]
        np.add.at(w_in, c, -lr * grad_vc)
        np.add.at(w_out, o, -lr * grad_uo)
        np.add.at(w_out, neg.reshape(-1), -lr * grad_un.reshape(-1, self.dim))

    def _train_epoch_parallel(
        self,
        sentences: list[np.ndarray],
        w_in: np.ndarray,
        w_out: np.ndarray,
        noise: np.ndarray,
        rng: np.random.Generator,
        step: int,
        total: int,
    ) -> None:
        # Hogwild-style: chunks update shared matrices without locks, so the
        # result is not reproducible; the deterministic path is n_jobs=1.
        chunks = np.array_split(np.arange(len(sentences)), self.n_jobs)
        seeds = rng.integers(0, 2**63 - 1, size=len(chunks))
        lr = self._lr_at(step, total)

        def work(chunk: np.ndarray, chunk_seed: int) -> None:
            local_rng = np.random.default_rng(int(chunk_seed))
            for idx in chunk:
                self._train_sentence(sentences[idx], w_in, w_out, noise, local_rng, lr)

        with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
            list(pool.map(work, chunks, seeds))

    @property
    def store(self) -> EmbeddingStore:
        require_fitted(self, "store_")
        return self.store_
