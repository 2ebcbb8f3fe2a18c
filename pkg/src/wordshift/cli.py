"""Command-line surface: train models, generate, attack, detect, evaluate.

Every command writes its primary output plus a ``<output>.manifest.json``
recording the resolved configuration, seeds, resource paths, and tool
version, which is sufficient to reproduce the run exactly. With
``--threads 1`` a re-run with the same manifest produces byte-identical
primary outputs.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .attack import (
    AttackConfig,
    AttackStrategy,
    EmbeddingSimilarityAttack,
    HybridAttack,
    SynonymAttack,
    save_attacked_jsonl,
)
from .corpus import load_jsonl, save_jsonl
from .detectors import (
    DetectorConfig,
    DetectorKind,
    score_batch,
    write_scores_csv,
)
from .embedding import SkipGramEmbedding, load_text_vectors, save_text_vectors
from .evaluation import (
    AttackPlan,
    Environment,
    ExperimentGridSpec,
    ExperimentResources,
    export_csv,
    export_heatmap_csv,
    generate_paired_documents,
    run_grid,
    sweep_budget,
)
from .ngram import MODEL_VERSION as NGRAM_VERSION
from .ngram import NGramLanguageModel
from .simdata import make_documents, make_language, make_lexicon
from .synonyms import ReplacementPosition, load_lexicon
from .tsetlin import TMAE_VERSION, TsetlinAutoencoder

_DETECTOR_NAMES = sorted(k.value for k in DetectorKind)


def _write_manifest(output: Path, command: str, args: dict) -> None:
    manifest = {
        "tool": "wordshift",
        "version": __version__,
        "format_versions": {"ngram": NGRAM_VERSION, "tmae": TMAE_VERSION},
        "command": command,
        "arguments": args,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = Path(str(output) + ".manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest_args(ns: argparse.Namespace) -> dict:
    skip = {"func", "command"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(ns).items() if k not in skip}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master random seed")
    parser.add_argument(
        "--threads", type=int, default=1,
        help="worker threads; 1 is the deterministic baseline",
    )


# -- subcommand implementations ---------------------------------------------


def _cmd_train_lm(ns: argparse.Namespace) -> int:
    docs = load_jsonl(ns.input)
    model = NGramLanguageModel(
        order=ns.order, alpha=ns.alpha, interpolation=ns.interpolation, cap=ns.cap
    )
    model.fit(docs)
    model.save(ns.output)
    _write_manifest(ns.output, "train-lm", _manifest_args(ns))
    print(f"wrote {ns.output} (order={ns.order}, vocab={len(model.vocab_)})")
    return 0


def _cmd_train_embedding(ns: argparse.Namespace) -> int:
    docs = load_jsonl(ns.input)
    trainer = SkipGramEmbedding(
        dim=ns.dim,
        window=ns.window,
        negatives=ns.negatives,
        epochs=ns.epochs,
        lr=ns.lr,
        cap=ns.cap,
        seed=ns.seed,
        n_jobs=ns.threads,
    )
    trainer.fit(docs)
    save_text_vectors(trainer.store_, ns.output)
    _write_manifest(ns.output, "train-embedding", _manifest_args(ns))
    print(f"wrote {ns.output} ({len(trainer.store_)} x {trainer.store_.dim})")
    return 0


def _cmd_train_tmae(ns: argparse.Namespace) -> int:
    docs = load_jsonl(ns.input)
    model = TsetlinAutoencoder(
        n_clauses=ns.clauses,
        state_midpoint=ns.midpoint,
        vote_margin=ns.margin,
        specificity=ns.specificity,
        epochs=ns.epochs,
        cap=ns.cap,
        max_positives=ns.max_positives,
        seed=ns.seed,
    )
    model.fit(docs)
    model.save(ns.output)
    _write_manifest(ns.output, "train-tmae", _manifest_args(ns))
    print(f"wrote {ns.output} ({ns.clauses} clauses, vocab={len(model.vocab_)})")
    return 0


def _cmd_simulate(ns: argparse.Namespace) -> int:
    lang = make_language(
        seed=ns.seed,
        n_groups=ns.groups,
        group_size=ns.group_size,
        branching=ns.branching,
        blend=ns.blend,
    )
    docs = make_documents(lang, count=ns.count, length=ns.length, seed=ns.seed, id_prefix=ns.prefix)
    save_jsonl(docs, ns.output)
    if ns.lexicon_output is not None:
        lexicon = make_lexicon(lang)
        with open(ns.lexicon_output, "w", encoding="utf-8") as fh:
            for word in lexicon.words():
                fh.write(f"{word}\t{','.join(lexicon.synonyms(word))}\n")
    _write_manifest(ns.output, "simulate", _manifest_args(ns))
    print(f"wrote {ns.output} ({ns.count} docs x {ns.length} words)")
    return 0


def _cmd_generate(ns: argparse.Namespace) -> int:
    model = NGramLanguageModel.load(ns.model)
    prompts = load_jsonl(ns.prompts)
    if ns.count is not None:
        prompts = prompts[: ns.count]
    docs = generate_paired_documents(
        model,
        prompts,
        seed=ns.seed,
        prompt_tokens=ns.prompt_tokens,
        source_tag=ns.source_tag,
        top_p=ns.top_p,
    )
    save_jsonl(docs, ns.output)
    _write_manifest(ns.output, "generate", _manifest_args(ns))
    print(f"wrote {ns.output} ({len(docs)} documents)")
    return 0


def _cmd_attack(ns: argparse.Namespace) -> int:
    docs = load_jsonl(ns.input)
    store = load_text_vectors(ns.embeddings)
    config = AttackConfig(
        strategy=AttackStrategy(ns.strategy),
        budget_ratio=ns.budget,
        sim_length=ns.sim_length,
        sim_threshold=ns.sim_threshold,
        position=ReplacementPosition(ns.position),
        seed=ns.seed,
    )
    scorer_vocab = None
    if ns.scorer is not None:
        scorer_vocab = set(NGramLanguageModel.load(ns.scorer).vocab_.words)
    if config.strategy is AttackStrategy.EMBEDDING:
        attack = EmbeddingSimilarityAttack(store, config, scorer_vocab=scorer_vocab)
    else:
        lexicon = load_lexicon(ns.lexicon)
        if config.strategy is AttackStrategy.SYNONYM:
            attack = SynonymAttack(lexicon, store, config, scorer_vocab=scorer_vocab)
        else:
            source = TsetlinAutoencoder.load(ns.tmae) if ns.tmae is not None else store
            attack = HybridAttack(lexicon, source, config, scorer_vocab=scorer_vocab)
    attacked = attack.transform(docs)
    save_attacked_jsonl(attacked, ns.output)
    _write_manifest(ns.output, "attack", _manifest_args(ns))
    changed = sum(len(a.records) for a in attacked)
    print(f"wrote {ns.output} ({len(attacked)} documents, {changed} replacements)")
    return 0


def _detector_config_from_args(ns: argparse.Namespace) -> DetectorConfig:
    store = load_text_vectors(ns.embeddings) if ns.embeddings is not None else None
    return DetectorConfig(
        n_samples=ns.n_samples,
        fast_method=ns.fast_method,
        n_perturbations=ns.n_perturbations,
        perturb_rate=ns.perturb_rate,
        perturb_top_k=ns.perturb_top_k,
        prefix_fraction=ns.prefix_fraction,
        n_regenerations=ns.n_regenerations,
        ngram_size=ns.ngram_size,
        store=store,
    )


def _parse_detectors(raw: str, parser: argparse.ArgumentParser) -> list[DetectorKind]:
    kinds = []
    for name in raw.split(","):
        name = name.strip()
        try:
            kinds.append(DetectorKind(name))
        except ValueError:
            parser.error(
                f"unknown detector {name!r}; valid names: {', '.join(_DETECTOR_NAMES)}"
            )
    return kinds


def _cmd_detect(ns: argparse.Namespace) -> int:
    scorer = NGramLanguageModel.load(ns.scorer)
    docs = load_jsonl(ns.input)
    config = _detector_config_from_args(ns)
    scores = []
    for kind in ns.detector_kinds:
        scores.extend(
            score_batch(kind, scorer, docs, config, seed=ns.seed, n_threads=ns.threads)
        )
    write_scores_csv(scores, ns.output)
    _write_manifest(ns.output, "detect", _manifest_args(ns))
    print(f"wrote {ns.output} ({len(scores)} scores)")
    return 0


def _load_eval_config(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_evaluate(ns: argparse.Namespace) -> int:
    cfg = _load_eval_config(ns.config)
    # Documented precedence: values in the config file win over flags.
    seed = int(cfg.get("seed", ns.seed))

    datasets = {name: load_jsonl(path) for name, path in cfg["datasets"].items()}
    generator = NGramLanguageModel.load(cfg["generator"])
    blackbox = (
        NGramLanguageModel.load(cfg["blackbox_scorer"])
        if cfg.get("blackbox_scorer")
        else None
    )
    embeddings = {name: load_text_vectors(path) for name, path in cfg["embeddings"].items()}
    lexicon = load_lexicon(cfg["lexicon"]) if cfg.get("lexicon") else None
    associations = {
        name: TsetlinAutoencoder.load(path)
        for name, path in cfg.get("associations", {}).items()
    }

    det_overrides = dict(cfg.get("detector_config", {}))
    perturber_name = cfg.get("perturber_embedding")
    if perturber_name is not None:
        det_overrides["store"] = embeddings[perturber_name]
    detector_config = DetectorConfig(**det_overrides)

    attacks = [
        AttackPlan(
            name=a["name"],
            strategy=AttackStrategy(a["strategy"]),
            embedding=a["embedding"],
            budget_ratio=a.get("budget_ratio", 0.05),
            position=ReplacementPosition(a.get("position", "min")),
            sim_length=a.get("sim_length", 400),
            sim_threshold=a.get("sim_threshold", 0.0),
            association_source=a.get("association_source"),
        )
        for a in cfg["attacks"]
    ]
    spec = ExperimentGridSpec(
        datasets=datasets,
        attacks=attacks,
        detectors=[DetectorKind(d) for d in cfg["detectors"]],
        environments=[Environment(e) for e in cfg.get("environments", ["white"])],
        n_docs=int(cfg.get("n_docs", 200)),
        prompt_tokens=int(cfg.get("prompt_tokens", 2)),
        top_p=float(cfg.get("top_p", 0.9)),
    )
    resources = ExperimentResources(
        generator=generator,
        embeddings=embeddings,
        blackbox_scorer=blackbox,
        lexicon=lexicon,
        association_sources=associations,
        detector_config=detector_config,
    )
    ratios = cfg.get("budget_sweep")
    if ratios:
        report = sweep_budget(spec, resources, ratios=ratios, seed=seed, n_threads=ns.threads)
    else:
        report = run_grid(spec, resources, seed=seed, n_threads=ns.threads)
    export_csv(report, ns.output)
    if ns.heatmap is not None:
        export_heatmap_csv(report, ns.heatmap)
    _write_manifest(ns.output, "evaluate", _manifest_args(ns))
    print(f"wrote {ns.output} ({len(report.rows)} cells)")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wordshift",
        description="Zero-shot AI-text detectors and embedding-guided substitution attacks",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"wordshift {__version__} (ngram format v{NGRAM_VERSION}, tmae format v{TMAE_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-lm", help="train the backoff n-gram language model")
    p.add_argument("--input", type=Path, required=True, help="training corpus (JSONL)")
    p.add_argument("--output", type=Path, required=True, help="model file (JSON)")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--interpolation", type=float, default=1.0)
    p.add_argument("--cap", type=int, default=40_000)
    _add_common(p)
    p.set_defaults(func=_cmd_train_lm)

    p = sub.add_parser("train-embedding", help="train skip-gram word vectors")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True, help="text-format vectors")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--cap", type=int, default=40_000)
    _add_common(p)
    p.set_defaults(func=_cmd_train_embedding)

    p = sub.add_parser("train-tmae", help="train the Tsetlin machine autoencoder")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True, help="model file (JSON)")
    p.add_argument("--clauses", type=int, default=200)
    p.add_argument("--midpoint", type=int, default=128)
    p.add_argument("--margin", type=int, default=15)
    p.add_argument("--specificity", type=float, default=3.0)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--cap", type=int, default=40_000)
    p.add_argument("--max-positives", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_train_tmae)

    p = sub.add_parser("simulate", help="emit a reproducible synthetic human corpus")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--length", type=int, default=150)
    p.add_argument("--groups", type=int, default=60)
    p.add_argument("--group-size", type=int, default=4)
    p.add_argument("--branching", type=int, default=6)
    p.add_argument("--blend", type=float, default=0.35)
    p.add_argument("--prefix", type=str, default="human")
    p.add_argument("--lexicon-output", type=Path, default=None,
                   help="also write the group-aligned synonym lexicon (TSV)")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("generate", help="sample AI documents from a trained model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--prompts", type=Path, required=True, help="prompt corpus (JSONL)")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--count", type=int, default=None, help="limit number of documents")
    p.add_argument("--prompt-tokens", type=int, default=2)
    p.add_argument("--top-p", type=float, default=0.9, help="nucleus sampling mass")
    p.add_argument("--source-tag", type=str, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("attack", help="perturb documents with a substitution strategy")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--strategy", choices=[s.value for s in AttackStrategy], required=True)
    p.add_argument("--embeddings", type=Path, required=True, help="text-format vectors")
    p.add_argument("--lexicon", type=Path, default=None, help="TSV synonym lexicon")
    p.add_argument("--tmae", type=Path, default=None, help="association model for hybrid stage 2")
    p.add_argument("--scorer", type=Path, default=None,
                   help="restrict replacements to this model's vocabulary")
    p.add_argument("--budget", type=float, default=0.05)
    p.add_argument("--position", choices=[pos.value for pos in ReplacementPosition],
                   default="min")
    p.add_argument("--sim-length", type=int, default=400)
    p.add_argument("--sim-threshold", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("detect", help="score documents with zero-shot detectors")
    p.add_argument("--scorer", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True, help="score CSV")
    p.add_argument("--detectors", type=str, required=True,
                   help=f"comma-separated from: {', '.join(_DETECTOR_NAMES)}")
    p.add_argument("--embeddings", type=Path, default=None,
                   help="vectors for the detectgpt/npr perturber")
    p.add_argument("--fast-method", choices=["sample", "analytic"], default="sample")
    p.add_argument("--n-samples", type=int, default=10_000)
    p.add_argument("--n-perturbations", type=int, default=100)
    p.add_argument("--perturb-rate", type=float, default=0.15)
    p.add_argument("--perturb-top-k", type=int, default=10)
    p.add_argument("--prefix-fraction", type=float, default=0.5)
    p.add_argument("--n-regenerations", type=int, default=10)
    p.add_argument("--ngram-size", type=int, default=3)
    _add_common(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("evaluate", help="run the experiment grid from a config file")
    p.add_argument("--config", type=Path, required=True, help="declarative JSON config")
    p.add_argument("--output", type=Path, required=True, help="report CSV")
    p.add_argument("--heatmap", type=Path, default=None, help="long-form heatmap CSV")
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)

    if ns.command == "attack" and ns.strategy in ("synonym", "hybrid") and ns.lexicon is None:
        parser.error(f"--strategy {ns.strategy} requires --lexicon")
    if ns.command == "detect":
        ns.detector_kinds = _parse_detectors(ns.detectors, parser)
        needs_store = {DetectorKind.DETECTGPT, DetectorKind.NPR}
        if needs_store & set(ns.detector_kinds) and ns.embeddings is None:
            parser.error("detectgpt/npr require --embeddings for their perturber")

    try:
        return ns.func(ns)
    except Exception as exc:  # runtime failure -> exit 1 with message on stderr
        print(f"wordshift: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
