import json

import numpy as np
import pytest

from aec.cli import main
from aec.features import FeatureMatrix, read_embeddings, write_embeddings
from aec.harness import read_manifest


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestUsage:
    def test_unknown_subcommand_exits_1(self, capsys):
        code, _, err = run(capsys, "frobnicate")
        assert code == 1
        assert "usage" in err

    def test_unknown_flag_exits_1(self, capsys):
        code, _, err = run(capsys, "synth", "--no-such-flag")
        assert code == 1
        assert "usage" in err

    def test_no_subcommand_exits_1(self, capsys):
        code, _, err = run(capsys)
        assert code == 1

    def test_resolved_parameters_printed(self, capsys, tmp_path):
        code, out, _ = run(capsys, "synth", "--out", str(tmp_path / "d"),
                           "--classes", "2", "--per-class", "1", "--seed", "5")
        assert code == 0
        assert "resolved parameters:" in out
        assert "seed = 5" in out

    def test_seed_env_fallback(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("AEC_SEED", "42")
        code, out, _ = run(capsys, "synth", "--out", str(tmp_path / "d"),
                           "--classes", "2", "--per-class", "1")
        assert code == 0
        assert "seed = 42" in out


class TestSynthAndPrep:
    def test_synth_writes_manifest_and_wavs(self, capsys, tmp_path):
        out = tmp_path / "corpus"
        code, _, _ = run(capsys, "synth", "--out", str(out), "--classes", "3",
                         "--per-class", "2", "--seed", "7")
        assert code == 0
        manifest = read_manifest(out / "manifest.csv")
        assert len(manifest.entries) == 6

    def test_prep_single_file(self, capsys, tmp_path, synth_corpus):
        _, corpus_dir = synth_corpus
        wav = next(p for p in sorted(corpus_dir.iterdir()) if p.suffix == ".wav")
        out = tmp_path / "prepped.wav"
        code, stdout, _ = run(capsys, "prep", "--in", str(wav), "--out", str(out))
        assert code == 0
        assert out.exists()
        assert "gain" in stdout

    def test_prep_missing_file_exits_1(self, capsys, tmp_path):
        code, _, err = run(capsys, "prep", "--in", str(tmp_path / "none.wav"),
                           "--out", str(tmp_path / "o.wav"))
        assert code == 1

    def test_prep_silent_clip_exits_2(self, capsys, tmp_path):
        from aec.audio import AudioClip, write_wav

        silent = tmp_path / "silent.wav"
        write_wav(silent, AudioClip(np.full(16000, 1e-7), 16000))
        code, _, err = run(capsys, "prep", "--in", str(silent),
                           "--out", str(tmp_path / "o.wav"))
        assert code == 2
        assert "silent" in err.lower() or "frames" in err.lower()


@pytest.fixture(scope="module")
def corpus_features(tmp_path_factory, synth_corpus):
    manifest, corpus_dir = synth_corpus
    work = tmp_path_factory.mktemp("cli_features")
    feats = work / "features.emb"
    code = main(["features", "--manifest", str(corpus_dir / "manifest.csv"),
                 "--mode", "logmel-pooled", "--out", str(feats)])
    assert code == 0
    return corpus_dir, feats


class TestFeaturePipeline:
    def test_features_file_readable(self, corpus_features):
        _, feats = corpus_features
        ids, matrix = read_embeddings(feats)
        assert matrix.values.shape == (40, 128)

    def test_fit_norm_and_train_eval_roundtrip(self, capsys, tmp_path, corpus_features):
        corpus_dir, feats = corpus_features
        manifest_path = corpus_dir / "manifest.csv"

        stats = tmp_path / "stats.norm"
        code, _, _ = run(capsys, "fit-norm", "--features", str(feats),
                         "--manifest", str(manifest_path), "--out", str(stats))
        assert code == 0

        model = tmp_path / "model.svm"
        code, _, _ = run(capsys, "train", "--model", "svm",
                         "--features", str(feats), "--manifest", str(manifest_path),
                         "--norm-stats", str(stats), "--out", str(model), "--seed", "0")
        assert code == 0

        report_dir = tmp_path / "report"
        code, out, _ = run(capsys, "eval", "--manifest", str(manifest_path),
                           "--model-file", str(model), "--features", str(feats),
                           "--norm-stats", str(stats), "--split", "all",
                           "--out", str(report_dir))
        assert code == 0
        assert "weighted accuracy" in out
        assert (report_dir / "report.json").exists()

    def test_eval_predictions_mode_and_length_mismatch(self, capsys, tmp_path, corpus_features):
        corpus_dir, _ = corpus_features
        manifest_path = corpus_dir / "manifest.csv"
        manifest = read_manifest(manifest_path)

        good = tmp_path / "preds.csv"
        lines = ["clip_id,label"] + [f"{e.clip_id},{e.label}" for e in manifest.entries]
        good.write_text("\n".join(lines) + "\n")
        code, out, _ = run(capsys, "eval", "--manifest", str(manifest_path),
                           "--predictions", str(good), "--split", "all")
        assert code == 0
        assert "weighted accuracy 1.0000" in out

        short = tmp_path / "short.csv"
        short.write_text("\n".join(lines[:-3]) + "\n")
        code, _, err = run(capsys, "eval", "--manifest", str(manifest_path),
                           "--predictions", str(short), "--split", "all")
        assert code == 1
        assert "predictions cover" in err


class TestExperiment:
    def test_kfold_experiment_report(self, capsys, tmp_path, synth_corpus):
        _, corpus_dir = synth_corpus
        out = tmp_path / "report"
        code, stdout, _ = run(capsys, "experiment",
                              "--manifest", str(corpus_dir / "manifest.csv"),
                              "--features-mode", "logmel-pooled",
                              "--model", "elm", "--split", "kfold:5",
                              "--seed", "3", "--out", str(out))
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert doc["format"] == "AEC-REPORT v1"
        assert len(doc["folds"]) == 5
        assert doc["reproducibility"]["seed"] == 3
        for name in ("report.txt", "per_class.csv", "confusion.csv",
                     "confusion.png", "per_class_recall.png", "fold_accuracy.png"):
            assert (out / name).exists(), name

    def test_embeddings_mode(self, capsys, tmp_path, synth_corpus):
        manifest, corpus_dir = synth_corpus
        rng = np.random.default_rng(0)
        y = manifest.labels_as_indices()
        centers = rng.normal(size=(manifest.n_classes, 16)) * 4.0
        rows = rng.normal(size=(len(manifest.entries), 16)) + centers[y]
        emb = tmp_path / "ext.emb"
        write_embeddings(emb, [e.clip_id for e in manifest.entries], FeatureMatrix(rows))
        out = tmp_path / "report"
        code, _, _ = run(capsys, "experiment",
                         "--manifest", str(corpus_dir / "manifest.csv"),
                         "--features-mode", "embeddings", "--embeddings", str(emb),
                         "--model", "svm", "--split", "holdout:0.7",
                         "--seed", "1", "--out", str(out))
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert doc["mean_accuracy"] > 0.9

    def test_config_file_overridden_by_flags(self, capsys, tmp_path, synth_corpus):
        _, corpus_dir = synth_corpus
        config = tmp_path / "run.conf"
        config.write_text("model = elm\nsplit = kfold:5\nseed = 9\n")
        out = tmp_path / "report"
        code, stdout, _ = run(capsys, "experiment",
                              "--manifest", str(corpus_dir / "manifest.csv"),
                              "--config", str(config), "--split", "holdout:0.7",
                              "--out", str(out))
        assert code == 0
        assert "model = elm" in stdout  # from the config file
        assert "split = holdout:0.7" in stdout  # flag wins
        assert "seed = 9" in stdout

    def test_unknown_config_key_exits_1(self, capsys, tmp_path, synth_corpus):
        _, corpus_dir = synth_corpus
        config = tmp_path / "run.conf"
        config.write_text("banana = 3\n")
        code, _, err = run(capsys, "experiment",
                           "--manifest", str(corpus_dir / "manifest.csv"),
                           "--config", str(config), "--out", str(tmp_path / "r"))
        assert code == 1

    def test_ladder_experiment_via_cli(self, capsys, tmp_path, synth_corpus):
        _, corpus_dir = synth_corpus
        out = tmp_path / "report"
        code, stdout, _ = run(capsys, "experiment",
                              "--manifest", str(corpus_dir / "manifest.csv"),
                              "--features-mode", "logmel-pooled",
                              "--model", "ladder", "--hidden-dims", "32,16",
                              "--epochs", "15", "--batch-size", "14",
                              "--denoise-costs", "2,0.2,0.1,0.1",
                              "--split", "kfold:2", "--seed", "4",
                              "--out", str(out))
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert len(doc["folds"]) == 2
        assert doc["reproducibility"]["model"] == "ladder"

    def test_jobs_parallel_matches_serial(self, tmp_path, synth_corpus):
        _, corpus_dir = synth_corpus
        base = ["experiment", "--manifest", str(corpus_dir / "manifest.csv"),
                "--features-mode", "mfcc-zcr", "--model", "elm",
                "--split", "kfold:4", "--seed", "2"]
        assert main(base + ["--out", str(tmp_path / "serial"), "--jobs", "1"]) == 0
        assert main(base + ["--out", str(tmp_path / "parallel"), "--jobs", "4"]) == 0
        serial = (tmp_path / "serial" / "report.json").read_bytes()
        parallel = (tmp_path / "parallel" / "report.json").read_bytes()
        assert serial == parallel


class TestHumanAcc:
    def test_worked_example(self, capsys, tmp_path):
        path = tmp_path / "ann.csv"
        rows = ["clip_id,judge1,judge2,judge3"]
        rows += [f"u{i},dog,dog,dog" for i in range(6)]
        rows += [f"t{i},dog,dog,cat" for i in range(3)]
        rows += ["d0,dog,cat,bird"]
        path.write_text("\n".join(rows) + "\n")
        code, out, _ = run(capsys, "human-acc", "--annotations", str(path))
        assert code == 0
        assert "human accuracy: 0.800000" in out
        assert "with consensus: 9" in out
