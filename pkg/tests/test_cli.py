import hashlib
import json
import subprocess
import sys

import pytest

from wordshift.corpus import load_jsonl

RUN = [sys.executable, "-m", "wordshift"]


def cli(*args, cwd=None):
    return subprocess.run(
        RUN + [str(a) for a in args], capture_output=True, text=True, cwd=cwd
    )


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Tiny end-to-end workspace: corpus, lexicon, models."""
    root = tmp_path_factory.mktemp("cliws")
    human = root / "human.jsonl"
    lexicon = root / "lexicon.tsv"
    r = cli(
        "simulate", "--output", human, "--count", 60, "--length", 60,
        "--groups", 12, "--group-size", 4, "--seed", 3,
        "--lexicon-output", lexicon,
    )
    assert r.returncode == 0, r.stderr
    lm = root / "lm.json"
    r = cli("train-lm", "--input", human, "--output", lm, "--order", 2)
    assert r.returncode == 0, r.stderr
    vec = root / "vectors.txt"
    r = cli(
        "train-embedding", "--input", human, "--output", vec,
        "--dim", 16, "--epochs", 2, "--seed", 1,
    )
    assert r.returncode == 0, r.stderr
    return {"root": root, "human": human, "lexicon": lexicon, "lm": lm, "vec": vec}


class TestVersionAndUsage:
    def test_version(self):
        r = cli("--version")
        assert r.returncode == 0
        assert "wordshift" in r.stdout and "format" in r.stdout

    def test_missing_required_flag_exits_2(self):
        r = cli("train-lm", "--output", "x.json")
        assert r.returncode == 2

    def test_unknown_detector_exits_2_listing_names(self, workspace):
        r = cli(
            "detect", "--scorer", workspace["lm"], "--input", workspace["human"],
            "--output", "out.csv", "--detectors", "nonsense",
        )
        assert r.returncode == 2
        assert "likelihood" in r.stderr and "fast_detectgpt" in r.stderr

    def test_hybrid_without_lexicon_exits_2(self, workspace):
        r = cli(
            "attack", "--input", workspace["human"], "--output", "x.jsonl",
            "--strategy", "hybrid", "--embeddings", workspace["vec"],
        )
        assert r.returncode == 2

    def test_runtime_error_exits_1(self, workspace, tmp_path):
        r = cli(
            "train-lm", "--input", tmp_path / "missing.jsonl",
            "--output", tmp_path / "x.json",
        )
        assert r.returncode == 1
        assert "error" in r.stderr


class TestTraining:
    def test_train_lm_emits_model_and_manifest(self, workspace, tmp_path):
        out = tmp_path / "lm.json"
        r = cli("train-lm", "--input", workspace["human"], "--output", out)
        assert r.returncode == 0 and str(out) in r.stdout
        manifest = json.loads((tmp_path / "lm.json.manifest.json").read_text())
        assert manifest["command"] == "train-lm"
        assert manifest["tool"] == "wordshift"

    def test_repeated_seeded_run_identical_hash(self, workspace, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            r = cli(
                "train-lm", "--input", workspace["human"], "--output", out,
                "--order", 2, "--seed", 7, "--threads", 1,
            )
            assert r.returncode == 0
        assert sha(a) == sha(b)

    def test_train_embedding_deterministic(self, workspace, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        for out in (a, b):
            r = cli(
                "train-embedding", "--input", workspace["human"], "--output", out,
                "--dim", 8, "--epochs", 1, "--seed", 5, "--threads", 1,
            )
            assert r.returncode == 0
        assert sha(a) == sha(b)

    def test_train_tmae(self, workspace, tmp_path):
        out = tmp_path / "tmae.json"
        r = cli(
            "train-tmae", "--input", workspace["human"], "--output", out,
            "--clauses", 20, "--epochs", 1, "--seed", 2,
        )
        assert r.returncode == 0
        obj = json.loads(out.read_text())
        assert obj["format"] == "wordshift-tmae"


class TestGenerate:
    def test_count_zero_gives_empty_file(self, workspace, tmp_path):
        out = tmp_path / "ai.jsonl"
        r = cli(
            "generate", "--model", workspace["lm"], "--prompts", workspace["human"],
            "--output", out, "--count", 0,
        )
        assert r.returncode == 0
        assert out.read_text() == ""

    def test_labels_all_ai(self, workspace, tmp_path):
        out = tmp_path / "ai.jsonl"
        r = cli(
            "generate", "--model", workspace["lm"], "--prompts", workspace["human"],
            "--output", out, "--count", 5, "--seed", 4,
        )
        assert r.returncode == 0
        docs = load_jsonl(out)
        assert len(docs) == 5
        assert all(d.label.value == "ai" for d in docs)

    def test_seed_reproducible(self, workspace, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            r = cli(
                "generate", "--model", workspace["lm"], "--prompts", workspace["human"],
                "--output", out, "--count", 5, "--seed", 4,
            )
            assert r.returncode == 0
        assert sha(a) == sha(b)


@pytest.fixture(scope="module")
def ai_corpus(workspace, tmp_path_factory):
    out = tmp_path_factory.mktemp("gen") / "ai.jsonl"
    r = cli(
        "generate", "--model", workspace["lm"], "--prompts", workspace["human"],
        "--output", out, "--count", 20, "--seed", 4,
    )
    assert r.returncode == 0, r.stderr
    return out


class TestAttackCommand:
    def test_budget_cap_on_attacked_output(self, workspace, ai_corpus, tmp_path):
        out = tmp_path / "attacked.jsonl"
        r = cli(
            "attack", "--input", ai_corpus, "--output", out,
            "--strategy", "embedding", "--embeddings", workspace["vec"],
            "--scorer", workspace["lm"], "--budget", 0.05, "--seed", 9,
        )
        assert r.returncode == 0, r.stderr
        for line in out.read_text().splitlines():
            obj = json.loads(line)
            informative = sum(
                1 for t in obj["text"].split() if t.isalpha() and len(t) >= 2
            )
            assert len(obj["perturbations"]) <= -(-5 * informative // 100) + 1

    def test_synonym_strategy_with_position(self, workspace, ai_corpus, tmp_path):
        out = tmp_path / "attacked.jsonl"
        r = cli(
            "attack", "--input", ai_corpus, "--output", out,
            "--strategy", "synonym", "--embeddings", workspace["vec"],
            "--lexicon", workspace["lexicon"], "--position", "min", "--seed", 9,
        )
        assert r.returncode == 0, r.stderr
        assert out.exists()

    def test_hybrid_with_tmae(self, workspace, ai_corpus, tmp_path):
        tmae = tmp_path / "tmae.json"
        r = cli(
            "train-tmae", "--input", workspace["human"], "--output", tmae,
            "--clauses", 20, "--epochs", 1, "--seed", 2,
        )
        assert r.returncode == 0
        out = tmp_path / "attacked.jsonl"
        r = cli(
            "attack", "--input", ai_corpus, "--output", out,
            "--strategy", "hybrid", "--embeddings", workspace["vec"],
            "--lexicon", workspace["lexicon"], "--tmae", tmae, "--seed", 9,
        )
        assert r.returncode == 0, r.stderr
        traced = [
            json.loads(line)["perturbations"] for line in out.read_text().splitlines()
        ]
        stages = [p["stage_trace"] for recs in traced for p in recs]
        assert all(len(s) == 2 for s in stages)

    def test_empty_input_gives_empty_output(self, workspace, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        out = tmp_path / "attacked.jsonl"
        r = cli(
            "attack", "--input", empty, "--output", out,
            "--strategy", "embedding", "--embeddings", workspace["vec"],
        )
        assert r.returncode == 0
        assert out.read_text() == ""


class TestDetectCommand:
    def test_one_doc_one_row_per_detector(self, workspace, ai_corpus, tmp_path):
        single = tmp_path / "one.jsonl"
        single.write_text(ai_corpus.read_text().splitlines()[0] + "\n")
        out = tmp_path / "scores.csv"
        r = cli(
            "detect", "--scorer", workspace["lm"], "--input", single,
            "--output", out, "--detectors", "likelihood,rank",
            "--fast-method", "analytic", "--seed", 0,
        )
        assert r.returncode == 0, r.stderr
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "doc_id,detector,score,flagged"
        assert len(lines) == 3

    def test_perturbation_detector_requires_embeddings(self, workspace, ai_corpus, tmp_path):
        r = cli(
            "detect", "--scorer", workspace["lm"], "--input", ai_corpus,
            "--output", tmp_path / "s.csv", "--detectors", "npr",
        )
        assert r.returncode == 2


class TestEvaluateCommand:
    def make_config(self, workspace, tmp_path, **overrides):
        cfg = {
            "seed": 11,
            "n_docs": 10,
            "prompt_tokens": 1,
            "datasets": {"sim": str(workspace["human"])},
            "generator": str(workspace["lm"]),
            "embeddings": {"sg": str(workspace["vec"])},
            "lexicon": str(workspace["lexicon"]),
            "detectors": ["likelihood", "fast_detectgpt"],
            "environments": ["white"],
            "detector_config": {"fast_method": "analytic"},
            "attacks": [
                {"name": "emb-min", "strategy": "embedding", "embedding": "sg"}
            ],
        }
        cfg.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_paired_aurocs_emitted(self, workspace, tmp_path):
        config = self.make_config(workspace, tmp_path)
        out = tmp_path / "report.csv"
        heat = tmp_path / "heat.csv"
        r = cli("evaluate", "--config", config, "--output", out, "--heatmap", heat)
        assert r.returncode == 0, r.stderr
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("dataset,attack,embedding,detector,environment")
        assert len(lines) == 3  # two detectors x one attack
        assert heat.exists()

    def test_config_seed_overrides_flag(self, workspace, tmp_path):
        config = self.make_config(workspace, tmp_path)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        r = cli("evaluate", "--config", config, "--output", a, "--seed", 1)
        assert r.returncode == 0, r.stderr
        r = cli("evaluate", "--config", config, "--output", b, "--seed", 2)
        assert r.returncode == 0, r.stderr
        assert sha(a) == sha(b)  # config file's seed wins over the flag

    def test_budget_sweep_rows(self, workspace, tmp_path):
        config = self.make_config(
            workspace, tmp_path,
            detectors=["likelihood"], budget_sweep=[0.01, 0.1],
        )
        out = tmp_path / "sweep.csv"
        r = cli("evaluate", "--config", config, "--output", out)
        assert r.returncode == 0, r.stderr
        rows = out.read_text().strip().splitlines()[1:]
        assert [row.split(",")[1] for row in rows] == ["emb-min@0.01", "emb-min@0.1"]
