"""End-to-end command-line pipeline tests in temporary directories."""

from __future__ import annotations

import hashlib
import json

import pytest

from currikit.cli import main

from _helpers import separable_corpus


@pytest.fixture()
def corpus_file(tmp_path):
    corpus = separable_corpus(120)
    path = tmp_path / "corpus.tsv"
    lines = [f"{doc.label}\t{' '.join(doc.tokens)}" for doc in corpus]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestIngest:
    def test_summary_line(self, corpus_file, tmp_path, capsys):
        code = run("ingest", "--input", corpus_file, "--format", "tsv",
                   "--out", tmp_path / "stats.json")
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("docs=120 vocab=")

    def test_missing_file_fails_to_stderr(self, tmp_path, capsys):
        code = run("ingest", "--input", tmp_path / "nope.txt", "--format", "lines",
                   "--out", tmp_path / "stats.json")
        assert code != 0
        assert "error:" in capsys.readouterr().err

    def test_rerun_identical_cache(self, corpus_file, tmp_path):
        out = tmp_path / "stats.json"
        run("ingest", "--input", corpus_file, "--format", "tsv", "--out", out)
        first = hashlib.sha256(out.read_bytes()).hexdigest()
        run("ingest", "--input", corpus_file, "--format", "tsv", "--out", out)
        assert hashlib.sha256(out.read_bytes()).hexdigest() == first


class TestScore:
    def test_metric_all_writes_six_files(self, corpus_file, tmp_path):
        out = tmp_path / "scores"
        code = run("score", "--input", corpus_file, "--format", "tsv",
                   "--metric", "all", "--out", out)
        assert code == 0
        names = sorted(p.name for p in out.glob("*.jsonl"))
        assert names == sorted(
            f"{m}.jsonl"
            for m in ("length", "max_word_rank", "likelihood_nll", "tfidf", "tse", "ee")
        )
        assert (out / "manifest.json").exists()

    def test_single_metric(self, corpus_file, tmp_path):
        out = tmp_path / "scores"
        code = run("score", "--input", corpus_file, "--format", "tsv",
                   "--metric", "tse", "--out", out)
        assert code == 0
        assert sorted(p.name for p in out.glob("*.jsonl")) == ["tse.jsonl"]

    def test_external_pass_through(self, corpus_file, tmp_path):
        ext = tmp_path / "mlm.jsonl"
        ext.write_text(
            "\n".join(json.dumps({"id": i, "score": i * 0.5}) for i in range(120)) + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "scores"
        code = run("score", "--input", corpus_file, "--format", "tsv",
                   "--metric", "external", "--scores", ext, "--out", out)
        assert code == 0
        assert (out / "external.jsonl").exists()

    def test_external_missing_id_fails(self, corpus_file, tmp_path, capsys):
        ext = tmp_path / "mlm.jsonl"
        ext.write_text(
            "\n".join(json.dumps({"id": i, "score": 1.0}) for i in range(119)) + "\n",
            encoding="utf-8",
        )
        code = run("score", "--input", corpus_file, "--format", "tsv",
                   "--metric", "external", "--scores", ext, "--out", tmp_path / "s")
        assert code != 0
        assert "missing score for document 119" in capsys.readouterr().err

    def test_idempotent_bytes(self, corpus_file, tmp_path):
        out = tmp_path / "scores"
        run("score", "--input", corpus_file, "--format", "tsv",
            "--metric", "tfidf", "--out", out)
        first = (out / "tfidf.jsonl").read_bytes()
        run("score", "--input", corpus_file, "--format", "tsv",
            "--metric", "tfidf", "--out", out)
        assert (out / "tfidf.jsonl").read_bytes() == first


class TestSchedule:
    def _scores(self, corpus_file, tmp_path, metric="tfidf"):
        out = tmp_path / "scores"
        run("score", "--input", corpus_file, "--format", "tsv",
            "--metric", metric, "--out", out)
        return out

    def test_cb_schedule_written(self, corpus_file, tmp_path):
        scores = self._scores(corpus_file, tmp_path, metric="length")
        sched = tmp_path / "cb.jsonl"
        code = run("schedule", "--input", corpus_file, "--format", "tsv",
                   "--sampler", "cb", "--metric", "length", "--scores-dir", scores,
                   "--batch-size", 8, "--steps", 20, "--seed", 1, "--out", sched)
        assert code == 0
        header = json.loads(sched.read_text(encoding="utf-8").splitlines()[0])
        assert header["sampler"] == "cb"
        assert header["metric"] == "length"

    def test_sm_with_length_is_incompatible(self, corpus_file, tmp_path, capsys):
        scores = self._scores(corpus_file, tmp_path, metric="length")
        code = run("schedule", "--input", corpus_file, "--format", "tsv",
                   "--sampler", "sm", "--metric", "length", "--scores-dir", scores,
                   "--batch-size", 8, "--steps", 20, "--out", tmp_path / "sm.jsonl")
        assert code != 0
        assert "incompatible" in capsys.readouterr().err

    def test_random_needs_no_metric(self, corpus_file, tmp_path):
        sched = tmp_path / "rand.jsonl"
        code = run("schedule", "--input", corpus_file, "--format", "tsv",
                   "--sampler", "random", "--batch-size", 8, "--steps", 15,
                   "--out", sched)
        assert code == 0
        assert sched.exists()

    def test_curriculum_needs_metric(self, corpus_file, tmp_path, capsys):
        code = run("schedule", "--input", corpus_file, "--format", "tsv",
                   "--sampler", "cb", "--batch-size", 8, "--steps", 15,
                   "--out", tmp_path / "cb.jsonl")
        assert code != 0
        assert "needs --metric" in capsys.readouterr().err

    def test_deterministic_bytes(self, corpus_file, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        for out in (a, b):
            run("schedule", "--input", corpus_file, "--format", "tsv",
                "--sampler", "random", "--batch-size", 4, "--steps", 9,
                "--seed", 5, "--out", out)
        assert a.read_bytes() == b.read_bytes()


class TestTrainAndReport:
    def _schedule(self, corpus_file, tmp_path):
        sched = tmp_path / "rand.jsonl"
        run("schedule", "--input", corpus_file, "--format", "tsv",
            "--sampler", "random", "--batch-size", 8, "--steps", 40,
            "--holdout-fraction", 0.1, "--seed", 2, "--out", sched)
        return sched

    def test_train_emits_curves_and_plots(self, corpus_file, tmp_path):
        sched = self._schedule(corpus_file, tmp_path)
        out = tmp_path / "run"
        code = run("train", "--input", corpus_file, "--format", "tsv",
                   "--schedule", sched, "--feature-dim", 256, "--eval-every", 5,
                   "--out", out)
        assert code == 0
        assert (out / "curve_lr0.1.csv").exists()
        assert (out / "curve_lr0.1.svg").exists()
        assert (out / "manifest.json").exists()

    def test_lr_sweep_three_curve_sets(self, corpus_file, tmp_path):
        sched = self._schedule(corpus_file, tmp_path)
        out = tmp_path / "run"
        code = run("train", "--input", corpus_file, "--format", "tsv",
                   "--schedule", sched, "--feature-dim", 256, "--eval-every", 5,
                   "--sweep-lr", "1e-3,1e-4,1e-5", "--out", out)
        assert code == 0
        for lr in ("0.001", "0.0001", "1e-05"):
            assert (out / f"curve_lr{lr}.csv").exists(), lr

    def test_matrix_and_report(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "runs"
        code = run("matrix", "--input", corpus_file, "--format", "tsv",
                   "--metrics", "length,tfidf", "--samplers", "db,ss",
                   "--seeds", "0,1", "--lr", 0.5, "--feature-dim", 256,
                   "--eval-every", 1, "--batch-size", 8, "--steps", 30,
                   "--out", out)
        assert code == 0
        assert (out / "runs.csv").exists()
        report = out / "report_lr0.5.csv"
        assert report.exists()
        lines = report.read_text(encoding="utf-8").splitlines()
        baseline_rows = [l for l in lines if l.startswith("baseline,")]
        assert len(baseline_rows) == 1
        length_row = next(l for l in lines if l.startswith("length,"))
        assert ",-" in length_row  # ss column incompatible with length

        # report re-aggregates an existing run directory
        report_out = tmp_path / "fresh"
        code = run("report", "--runs", out, "--out", report_out)
        assert code == 0
        assert (report_out / "report_lr0.5.csv").exists()
        regenerated = (report_out / "report_lr0.5.csv").read_text(encoding="utf-8")
        assert "baseline," in regenerated

    def test_plot_bytes_deterministic(self, corpus_file, tmp_path):
        sched = self._schedule(corpus_file, tmp_path)
        hashes = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            run("train", "--input", corpus_file, "--format", "tsv",
                "--schedule", sched, "--feature-dim", 128, "--eval-every", 5,
                "--out", out)
            hashes.append(hashlib.sha256((out / "curve_lr0.1.svg").read_bytes()).hexdigest())
        assert hashes[0] == hashes[1]

    def test_seed_env_var_default(self, corpus_file, tmp_path, monkeypatch):
        monkeypatch.setenv("CURRIKIT_SEED", "123")
        sched = tmp_path / "env.jsonl"
        run("schedule", "--input", corpus_file, "--format", "tsv",
            "--sampler", "random", "--batch-size", 4, "--steps", 5, "--out", sched)
        header = json.loads(sched.read_text(encoding="utf-8").splitlines()[0])
        assert header["seed"] == 123

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run("--version")
        assert excinfo.value.code == 0
        assert "currikit" in capsys.readouterr().out
