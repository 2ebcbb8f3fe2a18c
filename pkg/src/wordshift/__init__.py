"""Zero-shot AI-text detection, embedding-guided substitution attacks, and
an interpretable Tsetlin-machine word model, evaluated via AUROC grids."""

__version__ = "0.1.0"

from .attack import (
    AttackConfig,
    AttackedDocument,
    AttackStrategy,
    EmbeddingSimilarityAttack,
    HybridAttack,
    PerturbationRecord,
    SynonymAttack,
)
from .corpus import (
    BooleanEncoder,
    Document,
    Label,
    Token,
    TokenSequence,
    Vocabulary,
    build_vocab,
    detokenize,
    load_jsonl,
    save_jsonl,
    tokenize,
)
from .detectors import DetectionScore, DetectorConfig, DetectorKind, score_batch
from .embedding import EmbeddingStore, SkipGramEmbedding, cosine, load_text_vectors
from .evaluation import (
    AttackPlan,
    Environment,
    ExperimentGridSpec,
    ExperimentReport,
    ExperimentResources,
    auroc,
    roc_curve,
    run_grid,
    sweep_budget,
)
from .ngram import NGramLanguageModel
from .synonyms import ReplacementPosition, SynonymLexicon, load_lexicon
from .tsetlin import CoalescedTsetlinMachine, TsetlinAutoencoder

__all__ = [
    "__version__",
    "AttackConfig",
    "AttackedDocument",
    "AttackPlan",
    "AttackStrategy",
    "BooleanEncoder",
    "CoalescedTsetlinMachine",
    "DetectionScore",
    "DetectorConfig",
    "DetectorKind",
    "Document",
    "EmbeddingSimilarityAttack",
    "EmbeddingStore",
    "Environment",
    "ExperimentGridSpec",
    "ExperimentReport",
    "ExperimentResources",
    "HybridAttack",
    "Label",
    "NGramLanguageModel",
    "PerturbationRecord",
    "ReplacementPosition",
    "SkipGramEmbedding",
    "SynonymAttack",
    "SynonymLexicon",
    "Token",
    "TokenSequence",
    "TsetlinAutoencoder",
    "Vocabulary",
    "auroc",
    "build_vocab",
    "cosine",
    "detokenize",
    "load_jsonl",
    "load_lexicon",
    "load_text_vectors",
    "roc_curve",
    "run_grid",
    "save_jsonl",
    "score_batch",
    "sweep_budget",
    "tokenize",
]
