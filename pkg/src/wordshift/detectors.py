"""Zero-shot AI-text detectors scored against a pluggable language model.

Every detector maps a document to one real score, sign-normalized so that
higher always means "more AI-like"; that keeps AUROC computation uniform
downstream. The scorer is any object exposing the NGramLanguageModel surface
(profile / conditional_distribution / sample_continuation / vocab_).

Degenerate documents (empty, zero-variance alternatives, all-rank-one, ...)
raise ``DegenerateDocumentError``; batch scoring converts those into flagged
entries instead of aborting the rest of the batch.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ._util import derive_seed
from .corpus import Document
from .embedding import EmbeddingStore, OutOfVocabularyError

__all__ = [
    "DetectorKind",
    "DetectionScore",
    "DetectorConfig",
    "DegenerateDocumentError",
    "UnperturbableDocumentError",
    "NeighborPerturber",
    "FastDetectGPT",
    "DetectGPT",
    "LikelihoodDetector",
    "RankDetector",
    "LogRankDetector",
    "EntropyDetector",
    "LRRDetector",
    "NPRDetector",
    "DNADetector",
    "discrepancy",
    "discrepancy_from_samples",
    "build_detector",
    "score_batch",
    "write_scores_csv",
]

_RANK_FLOOR = 1e-6


class DetectorKind(str, Enum):
    FAST_DETECTGPT = "fast_detectgpt"
    DETECTGPT = "detectgpt"
    NPR = "npr"
    LRR = "lrr"
    DNA = "dna"
    LIKELIHOOD = "likelihood"
    RANK = "rank"
    LOGRANK = "logrank"
    ENTROPY = "entropy"


@dataclass(frozen=True)
class DetectionScore:
    doc_id: str
    detector: DetectorKind
    score: float
    flagged: bool = False
    higher_is_ai: bool = True


class DegenerateDocumentError(ValueError):
    """The document cannot be scored meaningfully; carries a fallback score."""

    def __init__(self, message: str, score: float = math.nan):
        super().__init__(message)
        self.score = score


class UnperturbableDocumentError(ValueError):
    """The perturber could not change a single token of the document."""


class NeighborPerturber:
    """Replaces a fraction of informative tokens with embedding neighbors.

    Desk-scale stand-in for mask-filling perturbation models: each selected
    token is swapped for one of its ``top_k`` nearest neighbors, chosen
    uniformly at random.
    """

    def __init__(self, store: EmbeddingStore, rate: float = 0.15, top_k: int = 10):
        if not 0 < rate <= 1:
            raise ValueError(f"rate must be in (0, 1], got {rate}")
        self.store = store
        self.rate = rate
        self.top_k = top_k

    def perturb(self, doc: Document, rng: np.random.Generator) -> list[str]:
        """One perturbed copy of the document's normalized token stream."""
        tokens = doc.words()
        positions = [
            i for i in doc.tokens.informative_indices() if tokens[i] in self.store
        ]
        if not positions:
            raise UnperturbableDocumentError(f"document {doc.id!r} has no replaceable token")
        count = min(len(positions), max(1, round(self.rate * len(positions))))
        chosen = rng.choice(len(positions), size=count, replace=False)
        changed = False
        out = list(tokens)
        for k in sorted(int(c) for c in chosen):
            word = tokens[positions[k]]
            try:
                neighbors = self.store.nearest_neighbors(word, limit=self.top_k)
            except OutOfVocabularyError:
                continue
            if not neighbors:
                continue
            out[positions[k]] = neighbors[int(rng.integers(len(neighbors)))].word
            changed = True
        if not changed:
            raise UnperturbableDocumentError(f"document {doc.id!r} could not be perturbed")
        return out


# -- score formulas ---------------------------------------------------------


def discrepancy(original_total: float, alt_mean: float, alt_variance: float) -> float:
    """Standardized gap between original log-likelihood and sampled alternatives."""
    if alt_variance <= 0:
        raise DegenerateDocumentError("alternatives have zero variance")
    return (original_total - alt_mean) / math.sqrt(alt_variance)


def discrepancy_from_samples(original_total: float, sample_totals: np.ndarray) -> float:
    totals = np.asarray(sample_totals, dtype=np.float64)
    if totals.size < 2:
        raise DegenerateDocumentError("need at least 2 sampled totals")
    std = float(totals.std(ddof=1))
    if std == 0:
        raise DegenerateDocumentError("alternatives have zero variance")
    return (original_total - float(totals.mean())) / std


class _DetectorBase(BaseEstimator):
    kind: DetectorKind
    higher_is_ai = True

    def __init__(self, scorer):
        self.scorer = scorer

    def fit(self, X=None, y=None):
        return self

    def score_document(self, doc: Document) -> float:
        raise NotImplementedError

    def score_samples(self, docs: list[Document]) -> np.ndarray:
        return np.array([self.score_document(d) for d in docs])

    def _tokens(self, doc: Document) -> list[str]:
        tokens = doc.words()
        if not tokens:
            raise DegenerateDocumentError("empty document")
        return tokens


class FastDetectGPT(_DetectorBase):
    """Sampling discrepancy: (log-likelihood - mean of alternatives) / stdev.

    ``method="sample"`` draws one alternative token per position per sample
    and standardizes the original total log-likelihood against the sampled
    totals. ``method="analytic"`` exploits positional independence under the
    scorer: the mean/variance of the alternative total are sums of exact
    per-position moments, giving the infinite-sample limit in one pass.
    """

    kind = DetectorKind.FAST_DETECTGPT

    def __init__(self, scorer, n_samples: int = 10_000, method: str = "sample", seed: int = 0):
        super().__init__(scorer)
        if method not in ("sample", "analytic"):
            raise ValueError(f"unknown method {method!r}")
        if method == "sample" and n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        self.n_samples = n_samples
        self.method = method
        self.seed = seed

    def score_document(self, doc: Document) -> float:
        tokens = self._tokens(doc)
        profile = self.scorer.profile(tokens)
        original = float(profile.log_probs.sum())
        if self.method == "analytic":
            return discrepancy(
                original,
                float(profile.mean_log_prob.sum()),
                float(profile.var_log_prob.sum()),
            )
        rng = np.random.default_rng(derive_seed(self.seed, "fastdetect", doc.id))
        totals = np.zeros(self.n_samples)
        context: list[str] = []
        for tok in tokens:
            dist = self.scorer.conditional_distribution(context)
            logs = np.log(dist.probs)
            draws = rng.choice(len(dist.probs), size=self.n_samples, p=dist.probs)
            totals += logs[draws]
            context.append(tok)
        return discrepancy_from_samples(original, totals)


class DetectGPT(_DetectorBase):
    """Probability curvature via perturbation: mean ll gap over perturbed stdev.

    The mean per-token log-likelihood drop from the original to its
    perturbations, normalized by the population stdev of the perturbed
    values. With a single perturbation the raw gap is returned unnormalized.
    """

    kind = DetectorKind.DETECTGPT

    def __init__(
        self,
        scorer,
        perturber: NeighborPerturber,
        n_perturbations: int = 100,
        normalize: bool = True,
        seed: int = 0,
    ):
        super().__init__(scorer)
        if n_perturbations < 1:
            raise ValueError("n_perturbations must be >= 1")
        self.perturber = perturber
        self.n_perturbations = n_perturbations
        self.normalize = normalize
        self.seed = seed

    def score_document(self, doc: Document) -> float:
        tokens = self._tokens(doc)
        original = float(self.scorer.profile(tokens).log_probs.mean())
        rng = np.random.default_rng(derive_seed(self.seed, "detectgpt", doc.id))
        perturbed = np.array(
            [
                float(self.scorer.profile(self.perturber.perturb(doc, rng)).log_probs.mean())
                for _ in range(self.n_perturbations)
            ]
        )
        gap = float((original - perturbed).mean())
        if not self.normalize or self.n_perturbations == 1:
            return gap
        std = float(perturbed.std(ddof=0))
        if std == 0:
            raise DegenerateDocumentError("perturbations left log-likelihood unchanged", score=gap)
        return gap / std


class LikelihoodDetector(_DetectorBase):
    """Mean per-token log probability (AI text scores closer to zero)."""

    kind = DetectorKind.LIKELIHOOD

    def score_document(self, doc: Document) -> float:
        return float(self.scorer.profile(self._tokens(doc)).log_probs.mean())


class RankDetector(_DetectorBase):
    """Negative mean token rank (AI tokens sit near the top of the distribution)."""

    kind = DetectorKind.RANK

    def score_document(self, doc: Document) -> float:
        return float(-self.scorer.profile(self._tokens(doc)).ranks.mean())


class LogRankDetector(_DetectorBase):
    """Negative mean log token rank."""

    kind = DetectorKind.LOGRANK

    def score_document(self, doc: Document) -> float:
        ranks = self.scorer.profile(self._tokens(doc)).ranks
        return float(-np.log(ranks).mean())


class EntropyDetector(_DetectorBase):
    """Negative mean conditional entropy (AI text sits in low-entropy contexts)."""

    kind = DetectorKind.ENTROPY

    def score_document(self, doc: Document) -> float:
        return float(-self.scorer.profile(self._tokens(doc)).entropies.mean())


class LRRDetector(_DetectorBase):
    """Log-likelihood / log-rank ratio: |sum log p| over sum of log ranks.

    The denominator sums the log of each 1-based rank, so an all-rank-one
    document is degenerate and is scored against a 1e-6 floor instead.
    """

    kind = DetectorKind.LRR

    def score_document(self, doc: Document) -> float:
        profile = self.scorer.profile(self._tokens(doc))
        numerator = abs(float(profile.log_probs.sum()))
        denominator = float(np.log(profile.ranks).sum())
        if denominator < _RANK_FLOOR:
            raise DegenerateDocumentError(
                "every token has rank 1", score=numerator / _RANK_FLOOR
            )
        return numerator / denominator


class NPRDetector(_DetectorBase):
    """Normalized perturbation rank: perturbed over original mean log rank."""

    kind = DetectorKind.NPR

    def __init__(
        self,
        scorer,
        perturber: NeighborPerturber,
        n_perturbations: int = 100,
        seed: int = 0,
    ):
        super().__init__(scorer)
        if n_perturbations < 1:
            raise ValueError("n_perturbations must be >= 1")
        self.perturber = perturber
        self.n_perturbations = n_perturbations
        self.seed = seed

    def score_document(self, doc: Document) -> float:
        tokens = self._tokens(doc)
        original = float(np.log(self.scorer.profile(tokens).ranks).mean())
        rng = np.random.default_rng(derive_seed(self.seed, "npr", doc.id))
        perturbed = np.array(
            [
                float(np.log(self.scorer.profile(self.perturber.perturb(doc, rng)).ranks).mean())
                for _ in range(self.n_perturbations)
            ]
        )
        if original < _RANK_FLOOR:
            raise DegenerateDocumentError(
                "every original token has rank 1",
                score=float(perturbed.mean()) / _RANK_FLOOR,
            )
        return float(perturbed.mean()) / original


class DNADetector(_DetectorBase):
    """Divergent n-gram analysis: regeneration overlap with the true continuation.

    The document is truncated at ``prefix_fraction``; the scorer regenerates
    continuations of the same length (nucleus-sampled, the usual decoding
    regime for regeneration), and the score is the mean n-gram Jaccard
    overlap between the true continuation and each regeneration. The scorer
    reproduces its own habits, so high overlap means AI-like.
    """

    kind = DetectorKind.DNA

    def __init__(
        self,
        scorer,
        prefix_fraction: float = 0.5,
        n_regenerations: int = 10,
        ngram_size: int = 3,
        regen_top_p: float = 0.9,
        seed: int = 0,
    ):
        super().__init__(scorer)
        if not 0 < prefix_fraction < 1:
            raise ValueError("prefix_fraction must be in (0, 1)")
        if n_regenerations < 1 or ngram_size < 1:
            raise ValueError("n_regenerations and ngram_size must be >= 1")
        self.prefix_fraction = prefix_fraction
        self.n_regenerations = n_regenerations
        self.ngram_size = ngram_size
        self.regen_top_p = regen_top_p
        self.seed = seed

    def score_document(self, doc: Document) -> float:
        tokens = self._tokens(doc)
        if len(tokens) < 4:
            raise DegenerateDocumentError("document too short to truncate")
        cut = min(max(1, int(len(tokens) * self.prefix_fraction)), len(tokens) - 1)
        prefix, continuation = tokens[:cut], tokens[cut:]
        true_grams = _ngram_set(continuation, self.ngram_size)
        rng = np.random.default_rng(derive_seed(self.seed, "dna", doc.id))
        overlaps = []
        for _ in range(self.n_regenerations):
            regen = self.scorer.sample_continuation(
                prefix, len(continuation), rng, top_p=self.regen_top_p
            )
            overlaps.append(_jaccard(true_grams, _ngram_set(regen, self.ngram_size)))
        return float(np.mean(overlaps))


def _ngram_set(tokens: list[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def _jaccard(a: set, b: set) -> float:
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


# -- batch scoring ----------------------------------------------------------


@dataclass(frozen=True)
class DetectorConfig:
    """Knobs shared by the detector factory; unknown fields are ignored per kind."""

    n_samples: int = 10_000
    fast_method: str = "sample"
    n_perturbations: int = 100
    perturb_rate: float = 0.15
    perturb_top_k: int = 10
    normalize_detectgpt: bool = True
    prefix_fraction: float = 0.5
    n_regenerations: int = 10
    ngram_size: int = 3
    regen_top_p: float = 0.9
    store: EmbeddingStore | None = field(default=None, compare=False)


def build_detector(
    kind: DetectorKind, scorer, config: DetectorConfig | None = None, seed: int = 0
) -> _DetectorBase:
    config = config or DetectorConfig()
    if kind in (DetectorKind.DETECTGPT, DetectorKind.NPR):
        if config.store is None:
            raise ValueError(f"{kind.value} requires an embedding store for its perturber")
        perturber = NeighborPerturber(
            config.store, rate=config.perturb_rate, top_k=config.perturb_top_k
        )
        if kind is DetectorKind.DETECTGPT:
            return DetectGPT(
                scorer,
                perturber,
                n_perturbations=config.n_perturbations,
                normalize=config.normalize_detectgpt,
                seed=seed,
            )
        return NPRDetector(scorer, perturber, n_perturbations=config.n_perturbations, seed=seed)
    if kind is DetectorKind.FAST_DETECTGPT:
        return FastDetectGPT(
            scorer, n_samples=config.n_samples, method=config.fast_method, seed=seed
        )
    if kind is DetectorKind.DNA:
        return DNADetector(
            scorer,
            prefix_fraction=config.prefix_fraction,
            n_regenerations=config.n_regenerations,
            ngram_size=config.ngram_size,
            regen_top_p=config.regen_top_p,
            seed=seed,
        )
    simple = {
        DetectorKind.LIKELIHOOD: LikelihoodDetector,
        DetectorKind.RANK: RankDetector,
        DetectorKind.LOGRANK: LogRankDetector,
        DetectorKind.ENTROPY: EntropyDetector,
        DetectorKind.LRR: LRRDetector,
    }
    return simple[kind](scorer)


def score_batch(
    kind: DetectorKind,
    scorer,
    docs: list[Document],
    config: DetectorConfig | None = None,
    seed: int = 0,
    n_threads: int = 1,
) -> list[DetectionScore]:
    """Score every document, order-preserving; degenerate docs become flagged rows.

    Randomness is derived per document from the batch seed, so results do not
    depend on thread count or scheduling.
    """
    if not docs:
        raise ValueError("docs must be non-empty")
    detector = build_detector(kind, scorer, config, seed=seed)

    def one(doc: Document) -> DetectionScore:
        try:
            return DetectionScore(doc.id, kind, detector.score_document(doc))
        except DegenerateDocumentError as exc:
            return DetectionScore(doc.id, kind, exc.score, flagged=True)
        except UnperturbableDocumentError:
            return DetectionScore(doc.id, kind, math.nan, flagged=True)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            return list(pool.map(one, docs))
    return [one(doc) for doc in docs]


def write_scores_csv(scores: list[DetectionScore], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "detector", "score", "flagged"])
        for s in scores:
            writer.writerow([s.doc_id, s.detector.value, f"{s.score:.6f}", int(s.flagged)])
