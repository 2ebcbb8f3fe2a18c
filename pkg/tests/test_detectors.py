import math

import numpy as np
import pytest

from wordshift.corpus import Document
from wordshift.detectors import (
    DNADetector,
    DegenerateDocumentError,
    DetectGPT,
    DetectorConfig,
    DetectorKind,
    EntropyDetector,
    FastDetectGPT,
    LikelihoodDetector,
    LogRankDetector,
    LRRDetector,
    NeighborPerturber,
    NPRDetector,
    RankDetector,
    UnperturbableDocumentError,
    build_detector,
    discrepancy,
    discrepancy_from_samples,
    score_batch,
    write_scores_csv,
)
from wordshift.embedding import EmbeddingStore
from wordshift.ngram import NGramLanguageModel, PositionProfile


def doc(text, id="d"):
    return Document.from_text(id=id, text=text)


class FakeScorer:
    """Profile oracle keyed by token tuples, for exact-arithmetic tests."""

    def __init__(self, profiles, continuations=None):
        self.profiles = profiles
        self.continuations = continuations or {}

    def profile(self, tokens):
        entry = self.profiles[tuple(tokens)]
        n = len(entry["log_probs"])
        return PositionProfile(
            log_probs=np.array(entry["log_probs"], dtype=float),
            ranks=np.array(entry.get("ranks", [1] * n)),
            entropies=np.array(entry.get("entropies", [0.0] * n), dtype=float),
            mean_log_prob=np.array(entry.get("mean", [0.0] * n), dtype=float),
            var_log_prob=np.array(entry.get("var", [0.0] * n), dtype=float),
        )

    def sample_continuation(self, prefix, length, rng, top_p=1.0):
        seq = self.continuations[tuple(prefix)]
        return list(seq[:length])


class FakePerturber:
    """Yields predetermined token lists in order."""

    def __init__(self, variants):
        self.variants = list(variants)
        self.calls = 0

    def perturb(self, doc, rng):
        out = self.variants[self.calls % len(self.variants)]
        self.calls += 1
        return list(out)


class TestDiscrepancyFormula:
    def test_hand_case(self):
        assert discrepancy(-2.0, -3.0, 4.0) == pytest.approx(0.5, abs=1e-12)

    def test_zero_numerator(self):
        assert discrepancy(-3.0, -3.0, 4.0) == 0.0

    def test_zero_variance_degenerate(self):
        with pytest.raises(DegenerateDocumentError):
            discrepancy(-2.0, -3.0, 0.0)

    def test_from_samples(self):
        totals = np.array([-2.0, -4.0])  # mean -3, sample std sqrt(2)
        expected = (-2.0 - (-3.0)) / math.sqrt(2.0)
        assert discrepancy_from_samples(-2.0, totals) == pytest.approx(expected)

    def test_constant_samples_degenerate(self):
        with pytest.raises(DegenerateDocumentError):
            discrepancy_from_samples(-2.0, np.array([-3.0, -3.0]))


def tiny_model():
    texts = ["aa bb cc dd", "aa bb dd cc", "cc aa bb dd", "dd cc bb aa"]
    docs = [Document.from_text(id=str(i), text=t) for i, t in enumerate(texts)]
    return NGramLanguageModel(order=2, alpha=0.5).fit(docs)


class TestFastDetectGPT:
    def test_same_seed_identical(self):
        model = tiny_model()
        det = FastDetectGPT(model, n_samples=200, method="sample", seed=9)
        d = doc("aa bb cc")
        assert det.score_document(d) == det.score_document(d)

    def test_sampling_converges_to_analytic(self):
        model = tiny_model()
        d = doc("aa bb cc dd aa bb")
        exact = FastDetectGPT(model, method="analytic").score_document(d)
        approx = FastDetectGPT(model, n_samples=20_000, method="sample", seed=3).score_document(d)
        # delta-method standard error of a studentized mean
        se = math.sqrt((1 + exact**2 / 2) / 20_000)
        assert abs(approx - exact) < 4 * se

    def test_doubling_samples_changes_little(self):
        model = tiny_model()
        d = doc("aa bb cc dd")
        small = FastDetectGPT(model, n_samples=5_000, method="sample", seed=1).score_document(d)
        large = FastDetectGPT(model, n_samples=10_000, method="sample", seed=2).score_document(d)
        se = math.sqrt((1 + small**2 / 2) / 5_000)
        assert abs(small - large) < 3 * math.sqrt(1.5) * se

    def test_empty_doc_degenerate(self):
        with pytest.raises(DegenerateDocumentError):
            FastDetectGPT(tiny_model(), method="analytic").score_document(doc(""))

    def test_invalid_method(self):
        with pytest.raises(ValueError):
            FastDetectGPT(tiny_model(), method="guess")


class TestDetectGPT:
    def test_hand_arithmetic(self):
        # original mean ll -10; perturbed {-12, -14}: mean gap 3.0,
        # population stdev 1.0 -> score 3.0
        scorer = FakeScorer(
            {
                ("orig",): {"log_probs": [-10.0]},
                ("p1",): {"log_probs": [-12.0]},
                ("p2",): {"log_probs": [-14.0]},
            }
        )
        det = DetectGPT(scorer, FakePerturber([("p1",), ("p2",)]), n_perturbations=2)
        assert det.score_document(doc("orig")) == pytest.approx(3.0, abs=1e-12)

    def test_single_perturbation_skips_normalization(self):
        scorer = FakeScorer(
            {("orig",): {"log_probs": [-10.0]}, ("p1",): {"log_probs": [-12.0]}}
        )
        det = DetectGPT(scorer, FakePerturber([("p1",)]), n_perturbations=1)
        assert det.score_document(doc("orig")) == pytest.approx(2.0)

    def test_identical_perturbations_degenerate(self):
        scorer = FakeScorer(
            {("orig",): {"log_probs": [-10.0]}, ("p1",): {"log_probs": [-10.0]}}
        )
        det = DetectGPT(scorer, FakePerturber([("p1",)]), n_perturbations=3)
        with pytest.raises(DegenerateDocumentError) as err:
            det.score_document(doc("orig"))
        assert err.value.score == 0.0


class TestSimpleDetectors:
    def test_likelihood_mean(self):
        scorer = FakeScorer({("aa", "bb"): {"log_probs": [math.log(0.5)] * 2}})
        det = LikelihoodDetector(scorer)
        assert det.score_document(doc("aa bb")) == pytest.approx(math.log(0.5))

    def test_likelihood_ignores_doc_id(self):
        scorer = FakeScorer({("aa",): {"log_probs": [-1.0]}})
        det = LikelihoodDetector(scorer)
        assert det.score_document(doc("aa", id="x")) == det.score_document(doc("aa", id="y"))

    def test_empty_doc_rejected(self):
        with pytest.raises(DegenerateDocumentError):
            LikelihoodDetector(tiny_model()).score_document(doc(""))

    def test_rank_all_ones(self):
        scorer = FakeScorer({("aa", "bb"): {"log_probs": [0, 0], "ranks": [1, 1]}})
        assert RankDetector(scorer).score_document(doc("aa bb")) == -1.0

    def test_rank_mean(self):
        scorer = FakeScorer({("aa", "bb"): {"log_probs": [0, 0], "ranks": [1, 3]}})
        assert RankDetector(scorer).score_document(doc("aa bb")) == -2.0

    def test_rank_monotone_in_ranks(self):
        low = FakeScorer({("aa",): {"log_probs": [0], "ranks": [1]}})
        high = FakeScorer({("aa",): {"log_probs": [0], "ranks": [100]}})
        assert RankDetector(low).score_document(doc("aa")) > RankDetector(high).score_document(
            doc("aa")
        )

    def test_logrank_rank_one_is_zero(self):
        scorer = FakeScorer({("aa", "bb"): {"log_probs": [0, 0], "ranks": [1, 1]}})
        assert LogRankDetector(scorer).score_document(doc("aa bb")) == 0.0

    def test_logrank_hand_case(self):
        scorer = FakeScorer({("aa", "bb"): {"log_probs": [0, 0], "ranks": [1, 3]}})
        expected = -(0 + math.log(3)) / 2
        assert LogRankDetector(scorer).score_document(doc("aa bb")) == pytest.approx(expected)

    def test_logrank_permutation_invariant(self):
        a = FakeScorer({("aa", "bb"): {"log_probs": [0, 0], "ranks": [2, 5]}})
        b = FakeScorer({("aa", "bb"): {"log_probs": [0, 0], "ranks": [5, 2]}})
        assert LogRankDetector(a).score_document(doc("aa bb")) == pytest.approx(
            LogRankDetector(b).score_document(doc("aa bb"))
        )

    def test_entropy_hand_case(self):
        scorer = FakeScorer(
            {("aa", "bb"): {"log_probs": [0, 0], "entropies": [0.5, 1.5]}}
        )
        assert EntropyDetector(scorer).score_document(doc("aa bb")) == pytest.approx(-1.0)

    def test_entropy_uniform_and_onehot_contexts(self):
        uniform = FakeScorer(
            {("aa", "bb"): {"log_probs": [0, 0], "entropies": [math.log(2)] * 2}}
        )
        assert EntropyDetector(uniform).score_document(doc("aa bb")) == pytest.approx(
            -math.log(2)
        )
        onehot = FakeScorer({("aa",): {"log_probs": [0], "entropies": [0.0]}})
        assert EntropyDetector(onehot).score_document(doc("aa")) == 0.0


class TestLRR:
    def test_hand_case(self):
        # sum log p = -6, sum log rank = log(e^3) -> use ranks whose logs sum to 3
        r = math.exp(1.5)
        scorer = FakeScorer(
            {("aa", "bb"): {"log_probs": [-3.0, -3.0], "ranks": [r, r]}}
        )
        assert LRRDetector(scorer).score_document(doc("aa bb")) == pytest.approx(2.0)

    def test_all_rank_one_degenerate_with_floored_score(self):
        scorer = FakeScorer(
            {("aa", "bb"): {"log_probs": [-2.5, -2.5], "ranks": [1, 1]}}
        )
        with pytest.raises(DegenerateDocumentError) as err:
            LRRDetector(scorer).score_document(doc("aa bb"))
        assert err.value.score == pytest.approx(5.0 / 1e-6)

    def test_positive_for_any_document(self):
        model = tiny_model()
        score = LRRDetector(model).score_document(doc("aa bb cc zz"))
        assert score > 0


class TestNPR:
    def test_unchanged_ranks_give_one(self):
        scorer = FakeScorer(
            {
                ("aa", "bb"): {"log_probs": [0, 0], "ranks": [2, 4]},
                ("p1", "p2"): {"log_probs": [0, 0], "ranks": [2, 4]},
            }
        )
        det = NPRDetector(scorer, FakePerturber([("p1", "p2")]), n_perturbations=2)
        assert det.score_document(doc("aa bb")) == pytest.approx(1.0)

    def test_hand_ratio(self):
        # original mean log rank 1.0; perturbed mean log ranks {2.0, 4.0} -> 3.0
        e = math.exp(1.0)
        scorer = FakeScorer(
            {
                ("aa",): {"log_probs": [0], "ranks": [e]},
                ("p1",): {"log_probs": [0], "ranks": [math.exp(2.0)]},
                ("p2",): {"log_probs": [0], "ranks": [math.exp(4.0)]},
            }
        )
        det = NPRDetector(scorer, FakePerturber([("p1",), ("p2",)]), n_perturbations=2)
        assert det.score_document(doc("aa")) == pytest.approx(3.0)

    def test_all_rank_one_original_degenerate(self):
        scorer = FakeScorer(
            {
                ("aa",): {"log_probs": [0], "ranks": [1]},
                ("p1",): {"log_probs": [0], "ranks": [5]},
            }
        )
        det = NPRDetector(scorer, FakePerturber([("p1",)]), n_perturbations=1)
        with pytest.raises(DegenerateDocumentError):
            det.score_document(doc("aa"))


class TestDNA:
    def test_identical_regenerations_score_one(self):
        cont = ("cc", "dd", "ee")
        scorer = FakeScorer({}, continuations={("aa", "bb"): cont})
        scorer.profiles[("aa", "bb", "cc", "dd", "ee")] = {"log_probs": [0] * 5}
        det = DNADetector(scorer, ngram_size=2, n_regenerations=3)
        d = doc("aa bb cc dd ee")
        assert det.score_document(d) == 1.0

    def test_disjoint_regenerations_score_zero(self):
        scorer = FakeScorer({}, continuations={("aa", "bb"): ("xx", "yy", "zz")})
        scorer.profiles[("aa", "bb", "cc", "dd", "ee")] = {"log_probs": [0] * 5}
        det = DNADetector(scorer, ngram_size=2, n_regenerations=2)
        assert det.score_document(doc("aa bb cc dd ee")) == 0.0

    def test_jaccard_hand_case(self):
        # continuation bigrams {cc dd, dd ee}; regen {cc dd, dd qq}:
        # intersection 1, union 3 -> 1/3
        scorer = FakeScorer({}, continuations={("aa", "bb"): ("cc", "dd", "qq")})
        scorer.profiles[("aa", "bb", "cc", "dd", "ee")] = {"log_probs": [0] * 5}
        det = DNADetector(scorer, ngram_size=2, n_regenerations=1)
        assert det.score_document(doc("aa bb cc dd ee")) == pytest.approx(1 / 3)

    def test_short_document_rejected(self):
        with pytest.raises(DegenerateDocumentError):
            DNADetector(tiny_model()).score_document(doc("aa bb cc"))


class TestPerturber:
    WORDS = ("wa", "wb", "wc", "wd", "we", "wf", "wg", "wh", "wi", "wj")

    def store(self):
        rng = np.random.default_rng(0)
        return EmbeddingStore(self.WORDS, rng.normal(size=(10, 4)))

    def test_replaces_requested_fraction(self):
        store = self.store()
        text = " ".join(self.WORDS)
        out = NeighborPerturber(store, rate=0.3).perturb(doc(text), np.random.default_rng(1))
        changed = sum(a != b for a, b in zip(out, text.split()))
        assert 1 <= changed <= 3

    def test_unperturbable_document(self):
        store = self.store()
        with pytest.raises(UnperturbableDocumentError):
            NeighborPerturber(store).perturb(doc("qq zz yy"), np.random.default_rng(1))

    def test_rate_validation(self):
        with pytest.raises(ValueError):
            NeighborPerturber(self.store(), rate=0.0)


class TestBatch:
    def test_order_preserved_and_batch_of_one(self):
        model = tiny_model()
        docs = [doc("aa bb cc", id="1"), doc("bb cc dd", id="2")]
        batch = score_batch(DetectorKind.LIKELIHOOD, model, docs, seed=0)
        assert [s.doc_id for s in batch] == ["1", "2"]
        single = score_batch(DetectorKind.LIKELIHOOD, model, [docs[0]], seed=0)
        assert single[0].score == batch[0].score

    def test_flagged_does_not_abort(self):
        model = tiny_model()
        docs = [doc("", id="empty"), doc("aa bb", id="ok")]
        batch = score_batch(DetectorKind.LIKELIHOOD, model, docs, seed=0)
        assert batch[0].flagged and not batch[1].flagged
        assert math.isfinite(batch[1].score)

    def test_threads_do_not_change_results(self):
        model = tiny_model()
        docs = [doc(f"aa bb cc dd aa bb cc dd", id=str(i)) for i in range(6)]
        seq = score_batch(DetectorKind.FAST_DETECTGPT, model, docs,
                          DetectorConfig(n_samples=100), seed=4, n_threads=1)
        par = score_batch(DetectorKind.FAST_DETECTGPT, model, docs,
                          DetectorConfig(n_samples=100), seed=4, n_threads=3)
        assert [s.score for s in seq] == [s.score for s in par]

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            score_batch(DetectorKind.LIKELIHOOD, tiny_model(), [], seed=0)

    def test_perturbation_detectors_require_store(self):
        with pytest.raises(ValueError, match="embedding store"):
            build_detector(DetectorKind.NPR, tiny_model(), DetectorConfig())

    def test_csv_dump(self, tmp_path):
        model = tiny_model()
        batch = score_batch(DetectorKind.LIKELIHOOD, model, [doc("aa bb", id="1")], seed=0)
        path = tmp_path / "scores.csv"
        write_scores_csv(batch, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "doc_id,detector,score,flagged"
        assert lines[1].startswith("1,likelihood,")
