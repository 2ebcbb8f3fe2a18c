"""Backoff n-gram language model used as both text source and detector scorer.

The model is an interpolated backoff LM: at every context length the
conditional distribution blends the observed counts with the next-shorter
context's distribution,

    p_m(w | c) = (count(c, w) + gamma * p_{m-1}(w | c')) / (count(c) + gamma),

bottoming out in an additively smoothed unigram over vocabulary + UNK. Each
level is a proper distribution by construction, rare contexts hedge toward
their shorter-context distribution instead of looking spuriously confident,
and every value is exactly reproducible from the stored counts. The model
exposes everything a zero-shot detector needs: per-token log probabilities,
ranks, conditional entropies, log-probability moments, and seeded sampling.
"""

from __future__ import annotations

import json
import threading
from collections import Counter, OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ._util import require_fitted
from .corpus import Document, Vocabulary

__all__ = [
    "NGramLanguageModel",
    "TokenDistribution",
    "PositionProfile",
    "entropy",
]

MODEL_FORMAT = "wordshift-ngram"
MODEL_VERSION = 1

_BOS = "<s>"


@dataclass(frozen=True)
class TokenDistribution:
    """Probabilities over vocabulary + UNK (last entry), summing to one."""

    probs: np.ndarray
    vocab: Vocabulary

    def prob_of(self, word: str) -> float:
        idx = self.vocab.id_of(word)
        if idx is None:
            idx = len(self.vocab)
        return float(self.probs[idx])


@dataclass(frozen=True)
class PositionProfile:
    """Per-position scorer statistics for one token sequence.

    ``mean_log_prob``/``var_log_prob`` are the expectation and population
    variance of the log probability of a token drawn from the conditional
    distribution at that position; detectors built on sampling discrepancies
    consume these directly in their analytic mode.
    """

    log_probs: np.ndarray
    ranks: np.ndarray
    entropies: np.ndarray
    mean_log_prob: np.ndarray
    var_log_prob: np.ndarray

    def __len__(self) -> int:
        return len(self.log_probs)


def entropy(dist: TokenDistribution) -> float:
    """Shannon entropy (nats) of a token distribution."""
    p = dist.probs
    return float(-(p * np.log(p)).sum())


class _ContextEntry:
    """Finalized counts for one context, pre-scaled for interpolation."""

    __slots__ = ("ids", "add", "scale")

    def __init__(self, ids: np.ndarray, counts: np.ndarray, gamma: float):
        denom = counts.sum() + gamma
        self.ids = ids
        self.add = counts / denom
        self.scale = gamma / denom


class NGramLanguageModel(BaseEstimator):
    """Order-n backoff language model over whitespace-tokenized documents.

    Parameters
    ----------
    order : context size + 1; ``order=3`` is a trigram model.
    alpha : additive smoothing constant applied at the unigram base, > 0.
    interpolation : pseudo-count weight given to the shorter-context
        distribution at each backoff level (gamma above), > 0.
    cap : maximum vocabulary size; tokens are ranked by frequency with a
        lexicographic tie-break, everything else maps to UNK.
    cache_bytes : approximate budget for the internal per-context
        distribution cache (a pure speed optimization; results are identical
        with the cache disabled).
    """

    def __init__(
        self,
        order: int = 3,
        alpha: float = 0.1,
        interpolation: float = 1.0,
        cap: int = 40_000,
        cache_bytes: int = 64 * 1024 * 1024,
    ):
        self.order = order
        self.alpha = alpha
        self.interpolation = interpolation
        self.cap = cap
        self.cache_bytes = cache_bytes

    # -- training ---------------------------------------------------------

    def fit(self, docs: list[Document], y=None) -> "NGramLanguageModel":
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.interpolation <= 0:
            raise ValueError(f"interpolation must be > 0, got {self.interpolation}")
        if not docs:
            raise ValueError("cannot train on an empty corpus")

        counts: Counter[str] = Counter()
        token_lists = []
        for doc in docs:
            words = doc.words() if isinstance(doc, Document) else list(doc)
            token_lists.append(words)
            counts.update(words)
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        vocab = Vocabulary(words=tuple(w for w, _ in ordered[: self.cap]), cap=self.cap)

        self.vocab_ = vocab
        self._unk = len(vocab)
        self._bos = len(vocab) + 1
        self._eos = len(vocab) + 2
        raw: list[dict[tuple[int, ...], Counter]] = [dict() for _ in range(self.order)]
        for words in token_lists:
            ids = self._to_ids(words)
            seq = [self._bos] * (self.order - 1) + ids + [self._eos]
            for i in range(self.order - 1, len(seq)):
                target = seq[i]
                for m in range(self.order):
                    ctx = tuple(seq[i - m : i])
                    bucket = raw[m].setdefault(ctx, Counter())
                    bucket[target] += 1
        self._raw_counts = raw
        self._finalize()
        return self

    def _to_ids(self, words: list[str]) -> list[int]:
        index = self.vocab_.index
        unk = self._unk
        return [index.get(w, unk) for w in words]

    def _finalize(self) -> None:
        """Build the smoothed unigram base and per-context probability arrays."""
        support = len(self.vocab_) + 1  # vocabulary + UNK
        uni = np.zeros(support, dtype=np.float64)
        for tid, n in self._raw_counts[0].get((), Counter()).items():
            if tid < support:
                uni[tid] = n
        total = uni.sum()
        self._base = (uni + self.alpha) / (total + self.alpha * support)

        tables: list[dict[tuple[int, ...], _ContextEntry]] = [dict()]
        for m in range(1, self.order):
            table: dict[tuple[int, ...], _ContextEntry] = {}
            for ctx, bucket in self._raw_counts[m].items():
                ids = np.array(sorted(t for t in bucket if t < support), dtype=np.int64)
                if ids.size == 0:
                    continue
                vals = np.array([bucket[t] for t in ids], dtype=np.float64)
                table[ctx] = _ContextEntry(ids, vals, self.interpolation)
            tables.append(table)
        self._tables = tables

        entry_bytes = 16 * support + 128
        self._cache_max = max(256, int(self.cache_bytes // entry_bytes))
        self._dist_cache: OrderedDict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = (
            OrderedDict()
        )
        self._profile_cache: OrderedDict[tuple[str, ...], PositionProfile] = OrderedDict()
        self._lock = threading.Lock()

    # -- scoring ----------------------------------------------------------

    def _context_ids(self, context: list[str] | tuple[str, ...]) -> tuple[int, ...]:
        ids = self._to_ids(list(context))
        keep = self.order - 1
        ids = ids[-keep:] if keep else []
        while len(ids) < keep:
            ids.insert(0, self._bos)
        return tuple(ids)

    def _dist_arrays(self, ctx_ids: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        """(probs, log probs) over vocabulary + UNK for a padded context."""
        with self._lock:
            hit = self._dist_cache.get(ctx_ids)
            if hit is not None:
                self._dist_cache.move_to_end(ctx_ids)
                return hit
        s = self._base.copy()
        for m in range(1, self.order):
            entry = self._tables[m].get(ctx_ids[len(ctx_ids) - m :])
            if entry is not None:
                s *= entry.scale
                s[entry.ids] += entry.add
        probs = s / s.sum()
        logs = np.log(probs)
        probs.setflags(write=False)
        logs.setflags(write=False)
        with self._lock:
            self._dist_cache[ctx_ids] = (probs, logs)
            if len(self._dist_cache) > self._cache_max:
                self._dist_cache.popitem(last=False)
        return probs, logs

    def conditional_distribution(self, context: list[str]) -> TokenDistribution:
        """Smoothed backoff distribution over vocabulary + UNK given a context."""
        require_fitted(self, "vocab_")
        probs, _ = self._dist_arrays(self._context_ids(context))
        return TokenDistribution(probs=probs, vocab=self.vocab_)

    def log_prob(self, tokens: list[str]) -> np.ndarray:
        """Per-token log probability; out-of-vocabulary tokens score as UNK."""
        require_fitted(self, "vocab_")
        return self.profile(tokens).log_probs

    def token_rank(self, context: list[str], token: str) -> int:
        """1-based descending-probability rank, ties broken by vocabulary index."""
        require_fitted(self, "vocab_")
        probs, _ = self._dist_arrays(self._context_ids(context))
        tid = self.vocab_.id_of(token)
        if tid is None:
            tid = self._unk
        return _rank_of(probs, tid)

    def profile(self, tokens: list[str] | tuple[str, ...]) -> PositionProfile:
        """Per-position log-probs, ranks, entropies, and logprob moments.

        Cached per token tuple; all detector metrics derive from this one
        pass so scoring many detectors over the same document costs a single
        sweep of conditional distributions.
        """
        require_fitted(self, "vocab_")
        key = tuple(tokens)
        with self._lock:
            hit = self._profile_cache.get(key)
            if hit is not None:
                self._profile_cache.move_to_end(key)
                return hit

        n = len(key)
        ids = self._to_ids(list(key))
        lp = np.empty(n)
        ranks = np.empty(n, dtype=np.int64)
        ents = np.empty(n)
        means = np.empty(n)
        variances = np.empty(n)
        keep = self.order - 1
        ctx = tuple([self._bos] * keep)
        for i, tid in enumerate(ids):
            probs, logs = self._dist_arrays(ctx)
            lp[i] = logs[tid]
            ranks[i] = _rank_of(probs, tid)
            mean = float(np.dot(probs, logs))
            means[i] = mean
            ents[i] = -mean
            variances[i] = float(np.dot(probs, logs * logs)) - mean * mean
            if keep:
                ctx = (ctx + (tid,))[-keep:]
        prof = PositionProfile(lp, ranks, ents, means, variances)
        with self._lock:
            self._profile_cache[key] = prof
            if len(self._profile_cache) > 4096:
                self._profile_cache.popitem(last=False)
        return prof

    # -- generation -------------------------------------------------------

    def sample_continuation(
        self,
        prompt: list[str],
        length: int,
        seed: int | np.random.Generator = 0,
        top_p: float = 1.0,
    ) -> list[str]:
        """Sample ``length`` tokens after ``prompt``, deterministic per seed.

        UNK is excluded from the sampling support (renormalized) so generated
        documents consist of real vocabulary words. ``top_p < 1`` applies
        nucleus sampling: only the smallest high-probability set covering
        ``top_p`` mass is sampled from, the usual decoding regime when a
        model plays the text-source role.
        """
        require_fitted(self, "vocab_")
        if length < 0:
            raise ValueError("length must be >= 0")
        if not 0 < top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        words = self.vocab_.words
        keep = self.order - 1
        ctx_ids = list(self._context_ids(prompt))
        out: list[str] = []
        for _ in range(length):
            probs, _ = self._dist_arrays(tuple(ctx_ids))
            p = probs[: len(words)].copy()
            if top_p < 1.0:
                order = np.lexsort((np.arange(len(p)), -p))
                cumulative = np.cumsum(p[order])
                cutoff = int(np.searchsorted(cumulative, top_p * cumulative[-1]) + 1)
                mask = np.zeros(len(p), dtype=bool)
                mask[order[:cutoff]] = True
                p[~mask] = 0.0
            tid = int(rng.choice(len(words), p=p / p.sum()))
            out.append(words[tid])
            if keep:
                ctx_ids = (ctx_ids + [tid])[-keep:]
        return out

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        require_fitted(self, "vocab_")
        counts = []
        for m in range(self.order):
            level = []
            for ctx in sorted(self._raw_counts[m]):
                bucket = self._raw_counts[m][ctx]
                level.append([list(ctx), sorted(bucket.items())])
            counts.append(level)
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "order": self.order,
            "alpha": self.alpha,
            "interpolation": self.interpolation,
            "cap": self.cap,
            "vocab": list(self.vocab_.words),
            "counts": counts,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj: dict) -> "NGramLanguageModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} file")
        if obj.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {obj.get('version')!r}")
        model = cls(
            order=obj["order"],
            alpha=obj["alpha"],
            interpolation=obj["interpolation"],
            cap=obj["cap"],
        )
        model.vocab_ = Vocabulary(words=tuple(obj["vocab"]), cap=obj["cap"])
        model._unk = len(model.vocab_)
        model._bos = len(model.vocab_) + 1
        model._eos = len(model.vocab_) + 2
        raw: list[dict[tuple[int, ...], Counter]] = [dict() for _ in range(model.order)]
        for m, level in enumerate(obj["counts"]):
            for ctx, items in level:
                raw[m][tuple(ctx)] = Counter({int(t): int(n) for t, n in items})
        model._raw_counts = raw
        model._finalize()
        return model

    @classmethod
    def load(cls, path: str | Path) -> "NGramLanguageModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _rank_of(probs: np.ndarray, tid: int) -> int:
    p = probs[tid]
    higher = int((probs > p).sum())
    tied_before = int((probs[:tid] == p).sum())
    return 1 + higher + tied_before
