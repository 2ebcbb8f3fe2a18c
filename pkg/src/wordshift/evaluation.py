"""AUROC computation, the white/black-box experiment grid, sweeps, and reports.

AUROC is the probability that a random AI-labeled score exceeds a random
human-labeled score, with ties counted half; it is computed from rank
statistics in O(m log m) and matches the pairwise definition exactly. The
grid runner generates AI documents from a source model, scores a paired
baseline, applies each attack, re-scores, and emits one report row per
(dataset, attack, detector, environment) cell.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ._util import derive_seed
from .attack import (
    AttackConfig,
    AttackedDocument,
    AttackStrategy,
    EmbeddingSimilarityAttack,
    HybridAttack,
    SynonymAttack,
)
from .corpus import Document, Label
from .detectors import DetectorConfig, DetectorKind, score_batch
from .embedding import EmbeddingStore
from .ngram import NGramLanguageModel
from .synonyms import ReplacementPosition, SynonymLexicon

__all__ = [
    "auroc",
    "roc_curve",
    "ROCCurve",
    "Environment",
    "AttackPlan",
    "ExperimentGridSpec",
    "ExperimentResources",
    "ReportRow",
    "ExperimentReport",
    "generate_paired_documents",
    "run_grid",
    "sweep_budget",
    "export_csv",
    "heatmap_data",
    "export_heatmap_csv",
    "REPORT_COLUMNS",
]

REPORT_COLUMNS = [
    "dataset",
    "attack",
    "embedding",
    "detector",
    "environment",
    "baseline_auroc",
    "attacked_auroc",
    "n",
    "seed",
]


def auroc(human_scores, ai_scores) -> float:
    """P(random AI score > random human score), ties counted 0.5.

    Computed via the Mann-Whitney U statistic on average ranks, which is
    exactly the pairwise win/tie count for any input size.
    """
    human = np.asarray(list(human_scores), dtype=np.float64)
    ai = np.asarray(list(ai_scores), dtype=np.float64)
    if human.size == 0 or ai.size == 0:
        raise ValueError("both score lists must be non-empty")
    ranks = rankdata(np.concatenate([human, ai]))
    u = ranks[human.size :].sum() - ai.size * (ai.size + 1) / 2
    return float(u / (human.size * ai.size))


@dataclass(frozen=True)
class ROCCurve:
    """(false-positive rate, true-positive rate) steps from (0,0) to (1,1)."""

    points: tuple[tuple[float, float], ...]
    auroc: float


def roc_curve(human_scores, ai_scores) -> ROCCurve:
    human = np.asarray(list(human_scores), dtype=np.float64)
    ai = np.asarray(list(ai_scores), dtype=np.float64)
    if human.size == 0 or ai.size == 0:
        raise ValueError("both score lists must be non-empty")
    points: list[tuple[float, float]] = [(0.0, 0.0)]
    fp = tp = 0
    for threshold in sorted(set(np.concatenate([human, ai])), reverse=True):
        fp = int((human >= threshold).sum())
        tp = int((ai >= threshold).sum())
        points.append((fp / human.size, tp / ai.size))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return ROCCurve(points=tuple(points), auroc=auroc(human, ai))


class Environment(str, Enum):
    """Scoring regime: same model as the generator, or a different one."""

    WHITE_BOX = "white"
    BLACK_BOX = "black"


@dataclass(frozen=True)
class AttackPlan:
    """One named attack column of the grid.

    ``embedding`` names the store driving the substitutions;
    ``association_source`` (hybrid only) names the trained association model,
    falling back to the embedding store when absent. ``label`` overrides the
    report column text (budget sweeps use it) without changing the name that
    attack seeds are derived from.
    """

    name: str
    strategy: AttackStrategy
    embedding: str
    budget_ratio: float = 0.05
    position: ReplacementPosition = ReplacementPosition.MIN
    sim_length: int = 400
    sim_threshold: float = 0.0
    association_source: str | None = None
    label: str | None = None

    @property
    def display(self) -> str:
        return self.label or self.name


@dataclass
class ExperimentGridSpec:
    datasets: dict[str, list[Document]]
    attacks: list[AttackPlan]
    detectors: list[DetectorKind]
    environments: list[Environment]
    n_docs: int = 200
    prompt_tokens: int = 2
    top_p: float = 0.9


@dataclass
class ExperimentResources:
    generator: NGramLanguageModel
    embeddings: dict[str, EmbeddingStore]
    blackbox_scorer: NGramLanguageModel | None = None
    lexicon: SynonymLexicon | None = None
    association_sources: dict[str, object] = field(default_factory=dict)
    detector_config: DetectorConfig = field(default_factory=DetectorConfig)

    def scorer_for(self, env: Environment) -> NGramLanguageModel:
        if env is Environment.WHITE_BOX:
            return self.generator
        if self.blackbox_scorer is None:
            raise ValueError("black-box environment requested but no black-box scorer loaded")
        return self.blackbox_scorer


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    attack: str
    embedding: str
    detector: DetectorKind
    environment: Environment
    baseline_auroc: float
    attacked_auroc: float
    n: int
    seed: int


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[ReportRow, ...]


def generate_paired_documents(
    generator: NGramLanguageModel,
    human_docs: list[Document],
    seed: int,
    prompt_tokens: int = 2,
    source_tag: str | None = None,
    top_p: float = 0.9,
) -> list[Document]:
    """One AI document per human document: same prompt prefix, same length.

    Generation uses nucleus sampling (``top_p``) by default, mirroring how
    text-source models are decoded in practice; the scorer still evaluates
    the full smoothed distribution.
    """
    tag = source_tag or f"ngram-{generator.order}"
    out: list[Document] = []
    for i, doc in enumerate(human_docs):
        words = doc.words()
        k = min(prompt_tokens, max(0, len(words) - 1))
        prompt = words[:k]
        rng = np.random.default_rng(derive_seed(seed, "generate", doc.id))
        continuation = generator.sample_continuation(prompt, len(words) - k, rng, top_p=top_p)
        out.append(
            Document.from_text(
                id=f"ai-{doc.id}",
                text=" ".join(prompt + continuation),
                label=Label.AI,
                source_model=tag,
            )
        )
    return out


def _clean_scores(entries) -> list[float]:
    return [e.score for e in entries if not e.flagged and math.isfinite(e.score)]


def _build_attack(plan: AttackPlan, resources: ExperimentResources, seed: int, scorer_vocab):
    config = AttackConfig(
        strategy=plan.strategy,
        budget_ratio=plan.budget_ratio,
        sim_length=plan.sim_length,
        sim_threshold=plan.sim_threshold,
        position=plan.position,
        seed=seed,
    )
    store = resources.embeddings.get(plan.embedding)
    if store is None:
        raise ValueError(f"attack {plan.name!r}: embedding {plan.embedding!r} not loaded")
    if plan.strategy is AttackStrategy.EMBEDDING:
        return EmbeddingSimilarityAttack(store, config, scorer_vocab=scorer_vocab)
    if resources.lexicon is None:
        raise ValueError(f"attack {plan.name!r} needs a synonym lexicon")
    if plan.strategy is AttackStrategy.SYNONYM:
        return SynonymAttack(resources.lexicon, store, config, scorer_vocab=scorer_vocab)
    source: object = store
    if plan.association_source is not None:
        source = resources.association_sources.get(plan.association_source)
        if source is None:
            raise ValueError(
                f"attack {plan.name!r}: association source {plan.association_source!r} not loaded"
            )
    return HybridAttack(resources.lexicon, source, config, scorer_vocab=scorer_vocab)


def run_grid(
    spec: ExperimentGridSpec,
    resources: ExperimentResources,
    seed: int = 0,
    n_threads: int = 1,
) -> ExperimentReport:
    """Run every (dataset x attack x detector x environment) cell.

    Per cell: generate paired AI documents, score the baseline, apply the
    attack to the AI documents, re-score, and record both AUROCs. All
    randomness is derived from ``seed`` and the cell coordinates, so two runs
    with the same seed produce identical reports.
    """
    rows: list[ReportRow] = []
    scorer_vocab = set(resources.generator.vocab_.words)
    for ds_name, human_all in spec.datasets.items():
        if not human_all:
            raise ValueError(f"dataset {ds_name!r} is empty")
        humans = human_all[: spec.n_docs]
        ai_docs = generate_paired_documents(
            resources.generator,
            humans,
            seed=derive_seed(seed, ds_name),
            prompt_tokens=spec.prompt_tokens,
            top_p=spec.top_p,
        )
        attacked_cache: dict[str, list[Document]] = {}
        for plan in spec.attacks:
            attack = _build_attack(
                plan, resources, seed=derive_seed(seed, ds_name, plan.name), scorer_vocab=scorer_vocab
            )
            attacked_cache[plan.name] = [a.document() for a in attack.transform(ai_docs)]
        for env in spec.environments:
            scorer = resources.scorer_for(env)
            for detector in spec.detectors:
                det_seed = derive_seed(seed, ds_name, env.value, detector.value)
                human_scores = _clean_scores(
                    score_batch(
                        detector, scorer, humans, resources.detector_config,
                        seed=det_seed, n_threads=n_threads,
                    )
                )
                base_scores = _clean_scores(
                    score_batch(
                        detector, scorer, ai_docs, resources.detector_config,
                        seed=det_seed, n_threads=n_threads,
                    )
                )
                if not human_scores or not base_scores:
                    raise ValueError(
                        f"cell ({ds_name}, baseline, {detector.value}, {env.value}):"
                        " no usable scores"
                    )
                baseline = auroc(human_scores, base_scores)
                for plan in spec.attacks:
                    att_scores = _clean_scores(
                        score_batch(
                            detector, scorer, attacked_cache[plan.name],
                            resources.detector_config, seed=det_seed, n_threads=n_threads,
                        )
                    )
                    if not att_scores:
                        raise ValueError(
                            f"cell ({ds_name}, {plan.name}, {detector.value}, {env.value}):"
                            " no usable scores"
                        )
                    rows.append(
                        ReportRow(
                            dataset=ds_name,
                            attack=plan.display,
                            embedding=plan.embedding,
                            detector=detector,
                            environment=env,
                            baseline_auroc=baseline,
                            attacked_auroc=auroc(human_scores, att_scores),
                            n=len(humans) + len(ai_docs),
                            seed=seed,
                        )
                    )
    return ExperimentReport(rows=tuple(rows))


def sweep_budget(
    spec: ExperimentGridSpec,
    resources: ExperimentResources,
    ratios: list[float],
    seed: int = 0,
    n_threads: int = 1,
) -> ExperimentReport:
    """Re-run the grid's attacks at each budget ratio (ascending).

    Row attack names carry the ratio as ``name@ratio``; baselines are shared
    across ratios because the underlying documents and scores are identical.
    """
    if sorted(ratios) != list(ratios):
        raise ValueError("ratios must be sorted ascending")
    rows: list[ReportRow] = []
    for ratio in ratios:
        swept = ExperimentGridSpec(
            datasets=spec.datasets,
            attacks=[
                replace(plan, label=f"{plan.name}@{ratio:g}", budget_ratio=ratio)
                for plan in spec.attacks
            ],
            detectors=spec.detectors,
            environments=spec.environments,
            n_docs=spec.n_docs,
            prompt_tokens=spec.prompt_tokens,
            top_p=spec.top_p,
        )
        rows.extend(run_grid(swept, resources, seed=seed, n_threads=n_threads).rows)
    return ExperimentReport(rows=tuple(rows))


def export_csv(report: ExperimentReport, path: str | Path) -> None:
    """Write report rows with a fixed column order and 6-decimal floats."""
    if not report.rows:
        raise ValueError("cannot export an empty report")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in report.rows:
            writer.writerow(
                [
                    r.dataset,
                    r.attack,
                    r.embedding,
                    r.detector.value,
                    r.environment.value,
                    f"{r.baseline_auroc:.6f}",
                    f"{r.attacked_auroc:.6f}",
                    r.n,
                    r.seed,
                ]
            )


def heatmap_data(report: ExperimentReport) -> list[dict]:
    """Long-form rows (embedding x detector x environment) of macro-averaged
    attacked AUROC, the shape a heatmap plotting tool consumes directly."""
    groups: dict[tuple[str, str, str], list[float]] = {}
    for r in report.rows:
        groups.setdefault((r.embedding, r.detector.value, r.environment.value), []).append(
            r.attacked_auroc
        )
    out = []
    for (embedding, detector, environment), values in sorted(groups.items()):
        out.append(
            {
                "embedding": embedding,
                "detector": detector,
                "environment": environment,
                "attacked_auroc": float(np.mean(values)),
                "n_cells": len(values),
            }
        )
    return out


def export_heatmap_csv(report: ExperimentReport, path: str | Path) -> None:
    rows = heatmap_data(report)
    if not rows:
        raise ValueError("cannot export an empty report")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["embedding", "detector", "environment", "attacked_auroc", "n_cells"])
        for r in rows:
            writer.writerow(
                [
                    r["embedding"],
                    r["detector"],
                    r["environment"],
                    f"{r['attacked_auroc']:.6f}",
                    r["n_cells"],
                ]
            )
