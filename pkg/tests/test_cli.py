import json
import os

import numpy as np
import pytest

from conftest import write_tsv
from synthdata import parent_child_ontology, write_fixture_files

from kgelab.cli import main
from kgelab.graph import load_triples


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def ontology_file(tmp_path):
    return write_tsv(tmp_path / "ontology.tsv", parent_child_ontology())


@pytest.fixture()
def lexicon_file(tmp_path):
    return write_tsv(
        tmp_path / "lexicon.tsv",
        [("abdominal pain", "abdominal pain"), ("belly ache", "abdominal pain")],
    )


@pytest.fixture()
def fixture_paths(tmp_path):
    return write_fixture_files(tmp_path)


def tiny_train_args(paths, checkpoint, family="complex", extra=()):
    return [
        "train",
        "--triples", paths["triples"],
        "--checkpoint", str(checkpoint),
        "--family", family,
        "--k", "8",
        "--eta", "2",
        "--epochs", "2",
        "--batches-count", "4",
        *extra,
    ]


class TestExtract:
    def test_writes_inverse_edges(self, capsys, tmp_path, ontology_file, lexicon_file):
        out = tmp_path / "extracted.tsv"
        code, stdout, _ = run(
            capsys, "extract", "--ontology", ontology_file,
            "--lexicon", lexicon_file, "--out", str(out),
        )
        assert code == 0
        triples = set(load_triples(str(out)).labeled())
        assert ("abdominal pain", "inverse is a", "colic") in triples
        assert ("abdominal pain", "inverse is a", "gastric colic") in triples
        assert "triples" in stdout

    def test_empty_lexicon_usage_error(self, capsys, tmp_path, ontology_file):
        empty = tmp_path / "empty.tsv"
        empty.write_text("\n", encoding="utf-8")
        code, _, stderr = run(
            capsys, "extract", "--ontology", ontology_file,
            "--lexicon", str(empty), "--out", str(tmp_path / "o.tsv"),
        )
        assert code == 2
        assert "error" in stderr

    def test_output_parseable(self, capsys, tmp_path, ontology_file, lexicon_file):
        out = tmp_path / "extracted.tsv"
        code, _, _ = run(
            capsys, "extract", "--ontology", ontology_file,
            "--lexicon", lexicon_file, "--out", str(out),
        )
        assert code == 0
        assert len(load_triples(str(out))) > 0


class TestStats:
    def test_text_format(self, capsys, fixture_paths):
        code, stdout, _ = run(capsys, "stats", "--triples", fixture_paths["triples"])
        assert code == 0
        assert "top subjects:" in stdout
        assert "top predicates:" in stdout

    def test_json_format(self, capsys, fixture_paths):
        code, stdout, _ = run(
            capsys, "stats", "--triples", fixture_paths["triples"],
            "--format", "json", "--top-k", "3",
        )
        assert code == 0
        payload = json.loads(stdout)
        assert payload["n_triples"] == 984
        assert len(payload["top_predicates"]) == 3


class TestSplit:
    def test_holdout_files(self, capsys, tmp_path, fixture_paths):
        out_train = tmp_path / "train.tsv"
        out_test = tmp_path / "test.tsv"
        code, stdout, _ = run(
            capsys, "split", "--triples", fixture_paths["triples"],
            "--out-train", str(out_train), "--out-test", str(out_test),
            "--train-fraction", "0.8", "--seed", "555",
        )
        assert code == 0
        train = load_triples(str(out_train))
        test = load_triples(str(out_test))
        assert len(train) + len(test) == 984

    def test_kfold_files(self, capsys, tmp_path, fixture_paths):
        out_dir = tmp_path / "folds"
        code, _, _ = run(
            capsys, "split", "--triples", fixture_paths["triples"],
            "--mode", "kfold", "--cv-k", "3", "--out-dir", str(out_dir),
        )
        assert code == 0
        assert sorted(os.listdir(out_dir)) == [
            "fold0_test.tsv", "fold0_train.tsv",
            "fold1_test.tsv", "fold1_train.tsv",
            "fold2_test.tsv", "fold2_train.tsv",
        ]


class TestTrain:
    def test_complex_defaults_echo_nll(self, capsys, tmp_path, fixture_paths):
        ckpt = tmp_path / "m.ckpt"
        code, stdout, _ = run(
            capsys, *tiny_train_args(fixture_paths, ckpt, family="complex")
        )
        assert code == 0
        echo = json.loads(stdout.splitlines()[0])
        assert echo["config"]["loss"] == "multiclass_nll"
        assert ckpt.exists()

    def test_transe_defaults_echo_pairwise(self, capsys, tmp_path, fixture_paths):
        ckpt = tmp_path / "m.ckpt"
        code, stdout, _ = run(
            capsys, *tiny_train_args(fixture_paths, ckpt, family="transe")
        )
        assert code == 0
        echo = json.loads(stdout.splitlines()[0])
        assert echo["config"]["loss"] == "pairwise"

    def test_rerun_identical_checkpoint(self, capsys, tmp_path, fixture_paths):
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        assert run(capsys, *tiny_train_args(fixture_paths, a))[0] == 0
        assert run(capsys, *tiny_train_args(fixture_paths, b))[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_trace_provenance(self, capsys, tmp_path, fixture_paths):
        ckpt = tmp_path / "m.ckpt"
        trace = tmp_path / "trace.json"
        code, _, _ = run(
            capsys,
            *tiny_train_args(fixture_paths, ckpt, extra=["--trace", str(trace)]),
        )
        assert code == 0
        payload = json.loads(trace.read_text())
        assert payload["config"]["k"] == 8
        assert "sha256" in payload["inputs"]["triples"]
        assert len(payload["trace"]["epoch_mean_loss"]) == 2

    def test_no_temp_files_left(self, capsys, tmp_path, fixture_paths):
        ckpt = tmp_path / "m.ckpt"
        run(capsys, *tiny_train_args(fixture_paths, ckpt))
        leftovers = [f for f in os.listdir(tmp_path) if f.endswith(".tmp")]
        assert leftovers == []

    def test_variation3_train(self, capsys, tmp_path, fixture_paths):
        ckpt = tmp_path / "m.ckpt"
        code, _, _ = run(
            capsys,
            *tiny_train_args(
                fixture_paths, ckpt,
                extra=[
                    "--variation", "3",
                    "--lexicon", fixture_paths["lexicon"],
                    "--sentences", fixture_paths["sentences"],
                ],
            ),
        )
        assert code == 0

    def test_missing_checkpoint_flag(self, capsys, fixture_paths):
        code, _, stderr = run(
            capsys, "train", "--triples", fixture_paths["triples"],
            "--epochs", "1", "--k", "4", "--batches-count", "2",
        )
        assert code == 2
        assert "checkpoint" in stderr


class TestEvaluate:
    @pytest.fixture()
    def trained(self, capsys, tmp_path, fixture_paths):
        out_train = tmp_path / "train.tsv"
        out_test = tmp_path / "test.tsv"
        run(
            capsys, "split", "--triples", fixture_paths["triples"],
            "--out-train", str(out_train), "--out-test", str(out_test),
        )
        ckpt = tmp_path / "m.ckpt"
        args = tiny_train_args(fixture_paths, ckpt)
        args[2] = str(out_train)  # train on the train split
        run(capsys, *args)
        return {"checkpoint": str(ckpt), "train": str(out_train), "test": str(out_test)}

    def test_evaluate_reports_metrics(self, capsys, tmp_path, trained):
        report = tmp_path / "report.json"
        code, stdout, _ = run(
            capsys, "evaluate", "--checkpoint", trained["checkpoint"],
            "--test", trained["test"], "--known", trained["train"],
            "--report", str(report),
        )
        assert code == 0
        assert "MRR" in stdout
        payload = json.loads(report.read_text())
        assert 0 < payload["mrr"] <= 1
        assert payload["protocol"] == "filtered"
        assert payload["inputs"]["checkpoint"]["sha256"]

    def test_vocabulary_mismatch_fails(self, capsys, tmp_path, trained):
        alien = write_tsv(tmp_path / "alien.tsv", [("zz top", "rocks", "arena")])
        code, _, stderr = run(
            capsys, "evaluate", "--checkpoint", trained["checkpoint"],
            "--test", alien,
        )
        assert code == 1
        assert "unknown" in stderr.lower()

    def test_baselines_rendered(self, capsys, tmp_path, trained):
        baselines = tmp_path / "base.json"
        baselines.write_text(json.dumps(
            [{"name": "external benchmark", "mrr": 0.32, "hits10": 0.50, "hits1": 0.35}]
        ))
        code, stdout, _ = run(
            capsys, "evaluate", "--checkpoint", trained["checkpoint"],
            "--test", trained["test"], "--known", trained["train"],
            "--baselines", str(baselines),
        )
        assert code == 0
        assert "external benchmark" in stdout

    def test_raw_protocol_flag(self, capsys, trained):
        code, stdout, _ = run(
            capsys, "evaluate", "--checkpoint", trained["checkpoint"],
            "--test", trained["test"], "--protocol", "raw",
        )
        assert code == 0
        assert "raw" in stdout


class TestCv:
    def test_cv_smoke(self, capsys, tmp_path, fixture_paths):
        report = tmp_path / "cv.json"
        code, stdout, _ = run(
            capsys, "cv", "--triples", fixture_paths["triples"],
            "--cv-k", "2", "--family", "transe", "--k", "6", "--eta", "2",
            "--epochs", "1", "--batches-count", "4", "--report", str(report),
        )
        assert code == 0
        payload = json.loads(report.read_text())
        assert len(payload["folds"]) == 2
        assert "mean" in payload["summary"]

    def test_k_too_large_usage_error(self, capsys, tmp_path):
        small = write_tsv(tmp_path / "small.tsv", [("a", "r", "b"), ("b", "r", "c")])
        code, _, stderr = run(capsys, "cv", "--triples", small, "--cv-k", "50",
                              "--epochs", "1", "--k", "4", "--batches-count", "1")
        assert code == 2
        assert "error" in stderr


class TestPredict:
    def test_predict_objects(self, capsys, tmp_path, fixture_paths):
        ckpt = tmp_path / "m.ckpt"
        run(capsys, *tiny_train_args(fixture_paths, ckpt))
        code, stdout, _ = run(
            capsys, "predict", "--checkpoint", str(ckpt),
            "--predicate", "may be treated by", "--subject", "finding 000",
            "--top-k", "5",
        )
        assert code == 0
        assert len(stdout.strip().splitlines()) == 5

    def test_predict_subjects_json(self, capsys, tmp_path, fixture_paths):
        ckpt = tmp_path / "m.ckpt"
        run(capsys, *tiny_train_args(fixture_paths, ckpt))
        code, stdout, _ = run(
            capsys, "predict", "--checkpoint", str(ckpt),
            "--predicate", "is a", "--object", "category 00",
            "--top-k", "3", "--format", "json",
        )
        assert code == 0
        rows = json.loads(stdout)
        assert len(rows) == 3
        assert {"entity", "score"} <= set(rows[0])


class TestVariationCommand:
    def test_build_mode_writes_graph(self, capsys, tmp_path, fixture_paths):
        out = tmp_path / "v2.tsv"
        code, stdout, _ = run(
            capsys, "variation", "--triples", fixture_paths["triples"],
            "--lexicon", fixture_paths["lexicon"],
            "--sentences", fixture_paths["sentences"],
            "--variation", "2", "--out", str(out),
        )
        assert code == 0
        merged = load_triples(str(out))
        assert len(merged) >= 984
        assert any(p == "same_as" for _, p, _ in merged.labeled())

    def test_build_mode_hints(self, capsys, tmp_path, fixture_paths):
        out = tmp_path / "v3.tsv"
        hints = tmp_path / "hints.npz"
        code, _, _ = run(
            capsys, "variation", "--triples", fixture_paths["triples"],
            "--lexicon", fixture_paths["lexicon"],
            "--sentences", fixture_paths["sentences"],
            "--variation", "3", "--k", "8", "--out", str(out),
            "--hints-out", str(hints),
        )
        assert code == 0
        data = np.load(str(hints))
        assert data["vectors"].shape[1] == 8
        assert len(data["labels"]) == len(data["vectors"])

    def test_compare_mode_three_rows(self, capsys, tmp_path, fixture_paths):
        report = tmp_path / "compare.json"
        code, stdout, _ = run(
            capsys, "variation", "--compare",
            "--triples", fixture_paths["triples"],
            "--lexicon", fixture_paths["lexicon"],
            "--sentences", fixture_paths["sentences"],
            "--family", "complex", "--k", "8", "--eta", "2",
            "--epochs", "2", "--batches-count", "4",
            "--report", str(report),
        )
        assert code == 0
        payload = json.loads(report.read_text())
        variations = [row.get("variation") for row in payload["rows"]]
        assert variations == [1, 2, 3]
        for row in payload["rows"]:
            assert 0 <= row["mrr"] <= 1
            assert 0 <= row["hits10"] <= 1
            assert 0 <= row["hits1"] <= 1


class TestUsageErrors:
    def test_variation_build_needs_out(self, capsys, fixture_paths):
        code, _, stderr = run(
            capsys, "variation", "--triples", fixture_paths["triples"],
        )
        assert code == 2
        assert "--out" in stderr

    def test_split_holdout_needs_paths(self, capsys, fixture_paths):
        code, _, stderr = run(
            capsys, "split", "--triples", fixture_paths["triples"],
        )
        assert code == 2
        assert "out-train" in stderr

    def test_split_kfold_needs_dir(self, capsys, fixture_paths):
        code, _, stderr = run(
            capsys, "split", "--triples", fixture_paths["triples"], "--mode", "kfold",
        )
        assert code == 2
        assert "out-dir" in stderr

    def test_predict_needs_anchor(self, capsys, tmp_path, fixture_paths):
        ckpt = tmp_path / "m.ckpt"
        run(capsys, *tiny_train_args(fixture_paths, ckpt))
        code, _, stderr = run(
            capsys, "predict", "--checkpoint", str(ckpt), "--predicate", "is a",
        )
        assert code == 2
        assert "subject" in stderr

    def test_missing_file_clean_runtime_error(self, capsys):
        code, _, stderr = run(capsys, "stats", "--triples", "no/such/file.tsv")
        assert code == 1
        assert stderr.startswith("error:")


class TestConfigFile:
    def test_file_values_used_and_flags_override(self, capsys, tmp_path, fixture_paths):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# experiment defaults\n"
            "family = transe\n"
            "k = 6\n"
            "eta = 2\n"
            "epochs = 1\n"
            "batches_count = 4\n",
            encoding="utf-8",
        )
        ckpt = tmp_path / "m.ckpt"
        code, stdout, _ = run(
            capsys, "train", "--config", str(cfg),
            "--triples", fixture_paths["triples"],
            "--checkpoint", str(ckpt), "--k", "9",
        )
        assert code == 0
        echo = json.loads(stdout.splitlines()[0])
        assert echo["config"]["family"] == "transe"
        assert echo["config"]["k"] == 9  # flag beats file

    def test_env_var_config(self, capsys, tmp_path, fixture_paths, monkeypatch):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("k = 7\nepochs = 1\neta = 2\nbatches_count = 4\n")
        monkeypatch.setenv("KGELAB_CONFIG", str(cfg))
        ckpt = tmp_path / "m.ckpt"
        code, stdout, _ = run(
            capsys, "train", "--triples", fixture_paths["triples"],
            "--checkpoint", str(ckpt),
        )
        assert code == 0
        echo = json.loads(stdout.splitlines()[0])
        assert echo["config"]["k"] == 7

    def test_unknown_key_named(self, capsys, tmp_path, fixture_paths):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("warp_speed = 9\n")
        code, _, stderr = run(
            capsys, "train", "--config", str(cfg),
            "--triples", fixture_paths["triples"],
            "--checkpoint", "x.ckpt",
        )
        assert code == 2
        assert "warp_speed" in stderr
