"""Tsetlin machine core and the autoencoder that yields per-word associations.

Clauses are conjunctions over literals (one per vocabulary word plus one per
negated word); each literal's include/exclude decision is a finite automaton
whose state lives in [1, 2N] and which includes its literal while above the
midpoint N. A shared signed weight matrix couples the clause pool to every
output word, so one clause can vote for many words at once.

Feedback follows the canonical two-type scheme:

* Type I (pattern strengthening), given to clauses voting for the current
  target: a firing clause rewards its true literals with probability
  (s-1)/s and erodes false ones with probability 1/s; a silent clause erodes
  all literals with probability 1/s.
* Type II (pattern discrimination), given to clauses voting against: a
  firing clause include-promotes every excluded false literal, one step.

Per-output update probability is (T -+ clamped vote sum) / 2T, and weights of
firing clauses move +-1 alongside the feedback they gate.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ._util import require_fitted
from .corpus import Document, Vocabulary, build_vocab, encode_presence
from .embedding import OutOfVocabularyError, ScoredWord

__all__ = [
    "CoalescedTsetlinMachine",
    "TsetlinAutoencoder",
    "AssociationScores",
    "parse_clause",
    "TMAE_FORMAT",
]

TMAE_FORMAT = "wordshift-tmae"
TMAE_VERSION = 1

EMPTY_CLAUSE = "⊤"
_CLAUSE_RE = re.compile(r"^([+-]\d+):\s*(.*)$")


class CoalescedTsetlinMachine:
    """Clause pool with automata states and a signed clause-by-output weight matrix."""

    def __init__(
        self,
        n_clauses: int,
        n_literals: int,
        n_outputs: int,
        midpoint: int = 128,
        margin: int = 15,
        specificity: float = 3.0,
        rng: np.random.Generator | None = None,
    ):
        if n_literals % 2 != 0:
            raise ValueError("n_literals must be even (originals + negations)")
        if specificity <= 1.0:
            raise ValueError("specificity must be > 1")
        if midpoint < 1 or margin < 1:
            raise ValueError("midpoint and margin must be >= 1")
        self.n_clauses = n_clauses
        self.n_literals = n_literals
        self.n_outputs = n_outputs
        self.midpoint = midpoint
        self.margin = margin
        self.specificity = specificity
        # All automata start at the midpoint (everything excluded); weights
        # start at random sign so each clause begins voting for or against.
        self.states = np.full((n_clauses, n_literals), midpoint, dtype=np.int32)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = rng.choice(np.array([-1, 1], dtype=np.int64), size=(n_clauses, n_outputs))

    @classmethod
    def from_arrays(
        cls,
        states: np.ndarray,
        weights: np.ndarray,
        midpoint: int,
        margin: int = 15,
        specificity: float = 3.0,
    ) -> "CoalescedTsetlinMachine":
        machine = cls(
            n_clauses=states.shape[0],
            n_literals=states.shape[1],
            n_outputs=weights.shape[1],
            midpoint=midpoint,
            margin=margin,
            specificity=specificity,
        )
        if np.any(states < 1) or np.any(states > 2 * midpoint):
            raise ValueError("states must lie in [1, 2 * midpoint]")
        machine.states = states.astype(np.int32, copy=True)
        machine.weights = weights.astype(np.int64, copy=True)
        return machine

    def included(self) -> np.ndarray:
        """Boolean [n_clauses, n_literals]: literal included iff state > midpoint."""
        return self.states > self.midpoint

    def clause_outputs(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """AND of included literals per clause, as uint8.

        A clause with no included literals outputs 1 during training (so it
        can start matching) and 0 at inference (so it never votes).
        """
        x = np.asarray(x)
        if x.shape != (self.n_literals,):
            raise ValueError(f"input must have {self.n_literals} literals, got {x.shape}")
        include = self.included()
        violated = np.logical_and(include, x[None, :] == 0).any(axis=1)
        fires = ~violated
        if not training:
            fires &= include.any(axis=1)
        return fires.astype(np.uint8)

    def votes(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        fires = self.clause_outputs(x, training=training)
        return self.weights.T @ fires.astype(np.int64)

    def classify(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(vote sums, thresholded outputs); output is 1 whenever votes >= 0."""
        sums = self.votes(x, training=False)
        return sums, (sums >= 0).astype(np.uint8)

    def train_step(
        self, x: np.ndarray, output: int, target: int, rng: np.random.Generator
    ) -> None:
        """One stochastic update of states and weights for a single output.

        Every automaton moves at most one step and stays clamped to
        [1, 2 * midpoint]; weights of firing clauses move by +-1.
        """
        if target not in (0, 1):
            raise ValueError("target must be 0 or 1")
        fires = self.clause_outputs(x, training=True)
        w = self.weights[:, output]
        vote = int(np.clip(w @ fires.astype(np.int64), -self.margin, self.margin))
        if target == 1:
            update_p = (self.margin - vote) / (2 * self.margin)
        else:
            update_p = (self.margin + vote) / (2 * self.margin)
        selected = rng.random(self.n_clauses) < update_p
        if not selected.any():
            return

        votes_for = w >= 0
        if target == 1:
            type_one = selected & votes_for
            type_two = selected & ~votes_for
            delta = 1
        else:
            type_one = selected & ~votes_for
            type_two = selected & votes_for
            delta = -1

        firing = fires.astype(bool)
        self._type_i(np.flatnonzero(type_one & firing), x, firing=True, rng=rng)
        self._type_i(np.flatnonzero(type_one & ~firing), x, firing=False, rng=rng)
        self._type_ii(np.flatnonzero(type_two & firing), x)
        self.weights[selected & firing, output] += delta

    def _type_i(
        self, clause_idx: np.ndarray, x: np.ndarray, firing: bool, rng: np.random.Generator
    ) -> None:
        if clause_idx.size == 0:
            return
        draws = rng.random((clause_idx.size, self.n_literals))
        if firing:
            truthy = x.astype(bool)[None, :]
            reward = truthy & (draws < (self.specificity - 1.0) / self.specificity)
            erode = ~truthy & (draws < 1.0 / self.specificity)
            delta = reward.astype(np.int32) - erode.astype(np.int32)
        else:
            delta = -(draws < 1.0 / self.specificity).astype(np.int32)
        updated = self.states[clause_idx] + delta
        np.clip(updated, 1, 2 * self.midpoint, out=updated)
        self.states[clause_idx] = updated

    def _type_ii(self, clause_idx: np.ndarray, x: np.ndarray) -> None:
        if clause_idx.size == 0:
            return
        promotable = (~x.astype(bool))[None, :] & (self.states[clause_idx] <= self.midpoint)
        self.states[clause_idx] += promotable.astype(np.int32)


@dataclass(frozen=True)
class AssociationScores:
    """Per-vocabulary-word association strengths for one target word.

    ``scores[u]`` sums the target-column weights of every clause that
    includes word ``u``'s positive literal; the descending ranking over these
    scores is the machine's similarity ordering around the target.
    """

    target: str
    scores: np.ndarray
    vocab: Vocabulary

    def score_of(self, word: str) -> float:
        idx = self.vocab.id_of(word)
        if idx is None:
            raise OutOfVocabularyError(word)
        return float(self.scores[idx])

    def ranked(self, limit: int | None = None) -> list[ScoredWord]:
        """Words by descending score (vocab-index tie-break), target excluded."""
        order = np.lexsort((np.arange(len(self.scores)), -self.scores))
        out: list[ScoredWord] = []
        for idx in order:
            word = self.vocab.words[idx]
            if word == self.target:
                continue
            out.append(ScoredWord(word, float(self.scores[idx])))
            if limit is not None and len(out) == limit:
                break
        return out


class TsetlinAutoencoder(BaseEstimator):
    """Autoencoder-style coalesced Tsetlin machine over Boolean presence rows.

    For every vocabulary word the machine learns to predict the word's
    presence from the rest of the document: positives are documents
    containing the word with the word's own literal columns masked to
    unknown (both zero), negatives are an equal number of documents lacking
    it, masked the same way. The trained weights then yield interpretable
    per-word association scores and clause descriptions.
    """

    def __init__(
        self,
        n_clauses: int = 200,
        state_midpoint: int = 128,
        vote_margin: int = 15,
        specificity: float = 3.0,
        epochs: int = 1,
        cap: int = 40_000,
        max_positives: int | None = None,
        seed: int = 0,
    ):
        self.n_clauses = n_clauses
        self.state_midpoint = state_midpoint
        self.vote_margin = vote_margin
        self.specificity = specificity
        self.epochs = epochs
        self.cap = cap
        self.max_positives = max_positives
        self.seed = seed

    def fit(self, docs: list[Document], y=None) -> "TsetlinAutoencoder":
        if not docs:
            raise ValueError("cannot train on an empty corpus")
        vocab = build_vocab(docs, cap=self.cap)
        if len(vocab) == 0:
            raise ValueError("corpus has no informative tokens")
        rows = np.stack([encode_presence(d, vocab) for d in docs])
        self.vocab_ = vocab
        rng = np.random.default_rng(self.seed)
        machine = CoalescedTsetlinMachine(
            n_clauses=self.n_clauses,
            n_literals=2 * len(vocab),
            n_outputs=len(vocab),
            midpoint=self.state_midpoint,
            margin=self.vote_margin,
            specificity=self.specificity,
            rng=rng,
        )
        size = len(vocab)
        presence = rows[:, :size].astype(bool)
        doc_ids = np.arange(len(docs))
        for _ in range(self.epochs):
            for word_id in rng.permutation(size):
                positives = doc_ids[presence[:, word_id]]
                negatives = doc_ids[~presence[:, word_id]]
                if positives.size == 0 or negatives.size == 0:
                    continue
                if self.max_positives is not None and positives.size > self.max_positives:
                    positives = rng.choice(positives, size=self.max_positives, replace=False)
                n_neg = min(positives.size, negatives.size)
                negatives = rng.choice(negatives, size=n_neg, replace=False)
                schedule = [(d, 1) for d in positives] + [(d, 0) for d in negatives]
                for k in rng.permutation(len(schedule)):
                    doc_idx, label = schedule[k]
                    x = rows[doc_idx].copy()
                    x[word_id] = 0
                    x[size + word_id] = 0
                    machine.train_step(x, int(word_id), label, rng)
        self.machine_ = machine
        return self

    def association_scores(self, target: str) -> AssociationScores:
        """Association strength of every vocabulary word with ``target``."""
        require_fitted(self, "machine_")
        word_id = self.vocab_.id_of(target)
        if word_id is None:
            raise OutOfVocabularyError(target)
        include_pos = self.machine_.included()[:, : len(self.vocab_)]
        scores = include_pos.astype(np.int64).T @ self.machine_.weights[:, word_id]
        return AssociationScores(target=target, scores=scores.astype(np.float64), vocab=self.vocab_)

    def ranked_associations(self, target: str, limit: int = 400) -> list[ScoredWord]:
        return self.association_scores(target).ranked(limit=limit)

    def export_clauses(self, target: str) -> list[str]:
        """Human-readable clause list for one output, strongest weight first.

        Each line is ``{weight:+d}: lit ∧ lit ∧ ¬lit`` with literals in
        vocabulary order; an inclusion-free clause renders as ``⊤``.
        """
        require_fitted(self, "machine_")
        word_id = self.vocab_.id_of(target)
        if word_id is None:
            raise OutOfVocabularyError(target)
        include = self.machine_.included()
        size = len(self.vocab_)
        lines: list[tuple[int, int, str]] = []
        for j in range(self.machine_.n_clauses):
            weight = int(self.machine_.weights[j, word_id])
            parts = [self.vocab_.words[u] for u in np.flatnonzero(include[j, :size])]
            parts += ["¬" + self.vocab_.words[u] for u in np.flatnonzero(include[j, size:])]
            body = " ∧ ".join(parts) if parts else EMPTY_CLAUSE
            lines.append((-abs(weight), j, f"{weight:+d}: {body}"))
        lines.sort()
        return [text for _, _, text in lines]

    def classify(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        require_fitted(self, "machine_")
        return self.machine_.classify(x)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        require_fitted(self, "machine_")
        return {
            "format": TMAE_FORMAT,
            "version": TMAE_VERSION,
            "n_clauses": self.n_clauses,
            "state_midpoint": self.state_midpoint,
            "vote_margin": self.vote_margin,
            "specificity": self.specificity,
            "epochs": self.epochs,
            "cap": self.cap,
            "max_positives": self.max_positives,
            "seed": self.seed,
            "vocab": list(self.vocab_.words),
            "states": self.machine_.states.tolist(),
            "weights": self.machine_.weights.tolist(),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj: dict) -> "TsetlinAutoencoder":
        if obj.get("format") != TMAE_FORMAT:
            raise ValueError(f"not a {TMAE_FORMAT} file")
        if obj.get("version") != TMAE_VERSION:
            raise ValueError(f"unsupported model version {obj.get('version')!r}")
        model = cls(
            n_clauses=obj["n_clauses"],
            state_midpoint=obj["state_midpoint"],
            vote_margin=obj["vote_margin"],
            specificity=obj["specificity"],
            epochs=obj["epochs"],
            cap=obj["cap"],
            max_positives=obj["max_positives"],
            seed=obj["seed"],
        )
        model.vocab_ = Vocabulary(words=tuple(obj["vocab"]), cap=obj["cap"])
        model.machine_ = CoalescedTsetlinMachine.from_arrays(
            states=np.array(obj["states"], dtype=np.int32),
            weights=np.array(obj["weights"], dtype=np.int64),
            midpoint=obj["state_midpoint"],
            margin=obj["vote_margin"],
            specificity=obj["specificity"],
        )
        return model

    @classmethod
    def load(cls, path: str | Path) -> "TsetlinAutoencoder":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def parse_clause(line: str) -> tuple[int, frozenset[tuple[str, bool]]]:
    """Parse an ``export_clauses`` line back to (weight, {(word, negated)})."""
    m = _CLAUSE_RE.match(line.strip())
    if m is None:
        raise ValueError(f"not a clause line: {line!r}")
    weight = int(m.group(1))
    body = m.group(2).strip()
    literals: set[tuple[str, bool]] = set()
    if body != EMPTY_CLAUSE:
        for part in body.split(" ∧ "):
            part = part.strip()
            if part.startswith("¬"):
                literals.add((part[1:], True))
            else:
                literals.add((part, False))
    return weight, frozenset(literals)
