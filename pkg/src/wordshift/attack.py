"""Adversarial word-substitution strategies with budgets and audit traces.

Three strategies perturb a document by replacing informative tokens:

* embedding similarity: pick an entry of the target's cosine neighbor list
  at a configured position (most / intermediate / least similar);
* synonym: rank the target's curated synonyms by embedding cosine and pick
  by the same position rule;
* hybrid: draw a random synonym first, then replace it with the
  weakest-associated word from that synonym's association neighborhood,
  producing a fully traceable two-stage substitution.

Each replacement is logged as a PerturbationRecord so an attacked corpus can
be audited word by word. The number of replacements never exceeds
``ceil(budget_ratio * informative_token_count)``; tokens that yield no usable
candidate are skipped without consuming budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Container, Protocol

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._util import SkipWord, derive_seed
from .corpus import Document
from .embedding import EmbeddingStore, ScoredWord
from .synonyms import ReplacementPosition, SynonymLexicon, rank_synonyms, select_by_position

__all__ = [
    "AttackStrategy",
    "AttackConfig",
    "StageStep",
    "PerturbationRecord",
    "AttackedDocument",
    "replacement_budget",
    "candidate_positions",
    "render",
    "EmbeddingSimilarityAttack",
    "SynonymAttack",
    "HybridAttack",
    "save_attacked_jsonl",
]


class AttackStrategy(str, Enum):
    EMBEDDING = "embedding"
    SYNONYM = "synonym"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class AttackConfig:
    """Strategy-independent attack knobs.

    ``budget_ratio`` caps the fraction of informative tokens that may change;
    ``sim_length``/``sim_threshold`` bound the candidate neighbor list; and
    ``position`` selects which ranked candidate to take.
    """

    strategy: AttackStrategy = AttackStrategy.EMBEDDING
    budget_ratio: float = 0.05
    sim_length: int = 400
    sim_threshold: float = 0.0
    position: ReplacementPosition = ReplacementPosition.MIN
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.budget_ratio <= 1:
            raise ValueError(f"budget_ratio must be in (0, 1], got {self.budget_ratio}")
        if self.sim_length < 1:
            raise ValueError(f"sim_length must be >= 1, got {self.sim_length}")


@dataclass(frozen=True)
class StageStep:
    stage: str
    word: str
    score: float | None


@dataclass(frozen=True)
class PerturbationRecord:
    position: int
    original: str
    replacement: str
    stage_trace: tuple[StageStep, ...]
    strategy: AttackStrategy

    def __post_init__(self) -> None:
        if self.original == self.replacement:
            raise ValueError("replacement must differ from the original word")
        if not self.stage_trace:
            raise ValueError("stage_trace must be non-empty")


@dataclass(frozen=True)
class AttackedDocument:
    base: Document
    records: tuple[PerturbationRecord, ...]
    text: str

    def document(self) -> Document:
        """The perturbed text as a Document (same id, label, source tag)."""
        return Document.from_text(
            id=self.base.id,
            text=self.text,
            label=self.base.label,
            source_model=self.base.source_model,
        )


def replacement_budget(doc: Document, budget_ratio: float) -> int:
    """ceil(ratio * informative token count): a 150-word doc at 5% caps at 8."""
    return math.ceil(budget_ratio * doc.informative_count())


def _match_case(original_surface: str, replacement: str) -> str:
    if original_surface[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def _eligible_order(
    doc: Document, resource: Container[str], rng: np.random.Generator
) -> list[int]:
    eligible = [
        i
        for i in doc.tokens.informative_indices()
        if doc.tokens[i].normalized in resource
    ]
    order = rng.permutation(len(eligible))
    return [eligible[int(k)] for k in order]


def candidate_positions(
    doc: Document,
    resource: Container[str],
    config: AttackConfig,
    seed: int | None = None,
) -> list[int]:
    """Budget-truncated, seed-shuffled indices of replaceable tokens.

    A token qualifies when it is informative and its normalized form is known
    to ``resource`` (an embedding store or a synonym lexicon).
    """
    if seed is None:
        seed = derive_seed(config.seed, doc.id)
    rng = np.random.default_rng(seed)
    return _eligible_order(doc, resource, rng)[: replacement_budget(doc, config.budget_ratio)]


def render(base: Document, records: tuple[PerturbationRecord, ...]) -> str:
    """Splice replacements into the base text, preserving separators and
    the capitalization of sentence-initial originals."""
    seq = base.tokens
    for rec in records:
        surface = _match_case(base.tokens[rec.position].surface, rec.replacement)
        seq = seq.with_surface(rec.position, surface)
    return seq.render()


class _WordSource(Protocol):
    def ranked_associations(self, target: str, limit: int) -> list[ScoredWord]: ...


class _AttackBase(BaseEstimator, TransformerMixin):
    """Shared candidate loop: walk shuffled eligible positions, replace until
    the budget is spent, skipping tokens that offer no candidate."""

    strategy: AttackStrategy

    def __init__(self, config: AttackConfig, scorer_vocab: Container[str] | None):
        self.config = config
        self.scorer_vocab = scorer_vocab

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: list[Document]) -> list[AttackedDocument]:
        return [self.attack(doc) for doc in X]

    def attack(self, doc: Document) -> AttackedDocument:
        rng = np.random.default_rng(derive_seed(self.config.seed, doc.id))
        budget = replacement_budget(doc, self.config.budget_ratio)
        records: list[PerturbationRecord] = []
        for idx in _eligible_order(doc, self._resource(), rng):
            if len(records) >= budget:
                break
            word = doc.tokens[idx].normalized
            try:
                replacement, trace = self._replace(word, rng)
            except SkipWord:
                continue
            if replacement == word:
                continue
            records.append(
                PerturbationRecord(idx, word, replacement, tuple(trace), self.strategy)
            )
        recs = tuple(records)
        return AttackedDocument(base=doc, records=recs, text=render(doc, recs))

    def _admissible(self, word: str, original: str) -> bool:
        if word == original:
            return False
        if self.scorer_vocab is not None and word not in self.scorer_vocab:
            return False
        return True

    def _resource(self) -> Container[str]:
        raise NotImplementedError

    def _replace(
        self, word: str, rng: np.random.Generator
    ) -> tuple[str, list[StageStep]]:
        raise NotImplementedError


class EmbeddingSimilarityAttack(_AttackBase):
    """Replace tokens with entries of their cosine neighbor list."""

    strategy = AttackStrategy.EMBEDDING

    def __init__(
        self,
        store: EmbeddingStore,
        config: AttackConfig | None = None,
        scorer_vocab: Container[str] | None = None,
    ):
        super().__init__(config or AttackConfig(strategy=self.strategy), scorer_vocab)
        self.store = store

    def _resource(self) -> Container[str]:
        return self.store

    def _replace(self, word: str, rng: np.random.Generator) -> tuple[str, list[StageStep]]:
        neighbors = self.store.nearest_neighbors(
            word, limit=self.config.sim_length, min_score=self.config.sim_threshold
        )
        usable = [n for n in neighbors if self._admissible(n.word, word)]
        chosen = select_by_position(usable, self.config.position)
        return chosen.word, [StageStep("similarity", chosen.word, chosen.score)]


class SynonymAttack(_AttackBase):
    """Replace tokens with curated synonyms ranked by embedding similarity."""

    strategy = AttackStrategy.SYNONYM

    def __init__(
        self,
        lexicon: SynonymLexicon,
        store: EmbeddingStore,
        config: AttackConfig | None = None,
        scorer_vocab: Container[str] | None = None,
    ):
        super().__init__(config or AttackConfig(strategy=self.strategy), scorer_vocab)
        self.lexicon = lexicon
        self.store = store

    def _resource(self) -> Container[str]:
        return self.lexicon

    def _replace(self, word: str, rng: np.random.Generator) -> tuple[str, list[StageStep]]:
        ranked = rank_synonyms(self.lexicon, self.store, word)
        usable = [n for n in ranked if self._admissible(n.word, word)]
        chosen = select_by_position(usable, self.config.position)
        return chosen.word, [StageStep("synonym-rank", chosen.word, chosen.score)]


class HybridAttack(_AttackBase):
    """Random synonym first, then the weakest association of that synonym.

    Stage 1 picks a uniform random synonym of the target; stage 2 queries the
    association source (a trained Tsetlin autoencoder, or any embedding store
    as fallback) for the synonym's neighborhood and takes the lowest-scoring
    admissible entry. If stage 2 offers nothing, the stage-1 synonym itself
    becomes the replacement, and the trace says so.
    """

    strategy = AttackStrategy.HYBRID

    def __init__(
        self,
        lexicon: SynonymLexicon,
        source: _WordSource | EmbeddingStore,
        config: AttackConfig | None = None,
        scorer_vocab: Container[str] | None = None,
    ):
        super().__init__(config or AttackConfig(strategy=self.strategy), scorer_vocab)
        self.lexicon = lexicon
        self.source = source

    def _resource(self) -> Container[str]:
        return self.lexicon

    def _neighborhood(self, word: str) -> list[ScoredWord]:
        try:
            if hasattr(self.source, "ranked_associations"):
                return self.source.ranked_associations(word, limit=self.config.sim_length)
            return self.source.nearest_neighbors(
                word, limit=self.config.sim_length, min_score=self.config.sim_threshold
            )
        except SkipWord:
            return []

    def _replace(self, word: str, rng: np.random.Generator) -> tuple[str, list[StageStep]]:
        synonyms = self.lexicon.synonyms(word)
        if not synonyms:
            raise SkipWord(f"{word!r} has no synonyms")
        stage_one = synonyms[int(rng.integers(len(synonyms)))]
        trace = [StageStep("synonym", stage_one, None)]
        usable = [n for n in self._neighborhood(stage_one) if self._admissible(n.word, word)]
        if usable:
            chosen = usable[-1]  # ranking is descending: last = lowest score
            trace.append(StageStep("association-min", chosen.word, chosen.score))
            return chosen.word, trace
        if not self._admissible(stage_one, word):
            raise SkipWord(f"{word!r}: no admissible stage-2 candidate or fallback")
        trace.append(StageStep("fallback", stage_one, None))
        return stage_one, trace


def _record_to_json(rec: PerturbationRecord) -> dict:
    return {
        "position": rec.position,
        "original": rec.original,
        "replacement": rec.replacement,
        "strategy": rec.strategy.value,
        "stage_trace": [
            {"stage": s.stage, "word": s.word, "score": s.score} for s in rec.stage_trace
        ],
    }


def save_attacked_jsonl(attacked: list[AttackedDocument], path: str | Path) -> None:
    """Write attacked documents as JSONL with a full ``perturbations`` audit array."""
    with open(path, "w", encoding="utf-8") as fh:
        for item in attacked:
            doc = item.document()
            obj: dict = {"id": doc.id, "text": doc.text}
            if doc.label is not None:
                obj["label"] = doc.label.value
            if doc.source_model is not None:
                obj["source_model"] = doc.source_model
            obj["perturbations"] = [_record_to_json(r) for r in item.records]
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
