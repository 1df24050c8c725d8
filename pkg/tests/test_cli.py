import json
from pathlib import Path

import pytest

from warnrank.cli import main
from warnrank.config import load_config, save_config
from warnrank.experiment import ExperimentConfig


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "corpus"
    code = main(["synth", "--seed", "5", "--projects", "2", "--tp-rate", "0.4",
                 "--sites-per-project", "12", "--out", str(root)])
    assert code == 0
    return root


class TestPaperDefaults:
    def test_config_defaults_match_published_setup(self):
        cfg = ExperimentConfig()
        assert cfg.embed_dim == 96
        assert cfg.L_slice == 600
        assert cfg.L_stmt == 40
        assert cfg.hidden == 256
        assert cfg.dropout == 0.1
        assert cfg.batch_size == 64
        assert cfg.epochs == 60
        assert cfg.lr == 0.002
        assert cfg.folds == 5

    def test_adamax_defaults(self):
        from warnrank.neural import AdamaxState

        state = AdamaxState()
        assert state.lr == 0.002
        assert state.beta1 == 0.9
        assert state.beta2 == 0.999
        assert state.eps == 1e-8


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        cfg = ExperimentConfig(hidden=32, epochs=7, context_mode="data_only", seed=9)
        path = tmp_path / "cfg.ini"
        save_config(cfg, path)
        loaded = load_config(path)
        assert loaded == cfg

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.ini")

    def test_partial_file_keeps_defaults(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[model]\nhidden = 12\n")
        loaded = load_config(path)
        assert loaded.hidden == 12
        assert loaded.epochs == 60


class TestSliceCommand:
    def test_prints_context(self, cli_corpus, capsys):
        manifest = json.loads((cli_corpus / "manifest.json").read_text())
        rel = manifest["files"][0]["path"]
        warnings = [json.loads(l) for l in (cli_corpus / "warnings.jsonl").read_text().splitlines()]
        target = next(w for w in warnings if w["file"] == rel)
        code = main(["slice", "--corpus", str(cli_corpus), "--file", rel,
                     "--line", str(target["line"]), "--mode", "control_and_data"])
        out = capsys.readouterr().out
        assert code == 0
        assert rel in out
        assert "*" in out  # the reported statement is marked

    def test_raw_function_mode(self, cli_corpus, capsys):
        warnings = [json.loads(l) for l in (cli_corpus / "warnings.jsonl").read_text().splitlines()]
        w = warnings[0]
        code = main(["slice", "--corpus", str(cli_corpus), "--file", w["file"],
                     "--line", str(w["line"]), "--mode", "raw_function"])
        assert code == 0
        assert w["function"] in capsys.readouterr().out

    def test_unknown_line_exits_2(self, cli_corpus, capsys):
        manifest = json.loads((cli_corpus / "manifest.json").read_text())
        rel = manifest["files"][0]["path"]
        code = main(["slice", "--corpus", str(cli_corpus), "--file", rel, "--line", "99999"])
        assert code == 2
        assert rel in capsys.readouterr().err


class TestSynthCommand:
    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--seed", "3", "--projects", "2", "--out", str(a)]) == 0
        assert main(["synth", "--seed", "3", "--projects", "2", "--out", str(b)]) == 0
        assert (a / "warnings.jsonl").read_bytes() == (b / "warnings.jsonl").read_bytes()


MICRO_ARGS = [
    "--l-slice", "64", "--l-stmt", "16", "--embed-dim", "12", "--cbow-epochs", "2",
    "--hidden", "8", "--dense1", "16", "--dense2", "8", "--epochs", "2",
    "--batch-size", "8", "--seed", "3",
]


class TestPrepareCommand:
    def test_prepare_writes_cache_and_hits_on_rerun(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "out"
        args = ["prepare", "--corpus", str(cli_corpus), "--output-dir", str(out), *MICRO_ARGS]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert "vocabulary size" in first
        cache = out / "prepared.jsonl"
        assert cache.exists()
        digest = cache.read_bytes()
        assert main(args) == 0
        second = capsys.readouterr().out
        assert "cache hit" in second
        assert cache.read_bytes() == digest

    def test_compare_abstraction_reports_direction(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "out2"
        code = main(["prepare", "--corpus", str(cli_corpus), "--output-dir", str(out),
                     "--compare-abstraction", *MICRO_ARGS])
        assert code == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if "with abstraction" in l]
        assert lines
        on = int(lines[0].split("with abstraction:")[1].split(";")[0])
        off = int(lines[0].split("without:")[1])
        assert on < off


class TestTrainRankEvalFlow:
    def test_end_to_end_artifacts(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "artifacts"
        base = ["--corpus", str(cli_corpus), "--output-dir", str(out), *MICRO_ARGS]
        assert main(["train", *base]) == 0
        assert (out / "model.ckpt").exists()
        assert (out / "embedding.ckpt").exists()
        manifest = json.loads((out / "train_manifest.json").read_text())
        assert "corpus_hash" in manifest
        capsys.readouterr()

        assert main(["rank", *base]) == 0
        ranked_path = out / "ranked.json"
        assert ranked_path.exists()
        capsys.readouterr()

        assert main(["eval", "--scores", str(ranked_path), *base]) == 0
        eval_out = capsys.readouterr().out
        assert "P@K" in eval_out
        metrics = json.loads((out / "metrics.json").read_text())
        assert "per_k" in metrics

    def test_eval_without_labels_exits_2(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "unlabeled"
        out.mkdir()
        # strip labels from a copy of the corpus warnings
        import shutil

        corpus2 = tmp_path / "corpus2"
        shutil.copytree(cli_corpus, corpus2)
        recs = [json.loads(l) for l in (corpus2 / "warnings.jsonl").read_text().splitlines()]
        for r in recs:
            r.pop("label", None)
        (corpus2 / "warnings.jsonl").write_text("\n".join(json.dumps(r) for r in recs) + "\n")
        scores = out / "ranked.json"
        scores.write_text(json.dumps({"entries": [[recs[0]["id"], 0.5]]}))
        code = main(["eval", "--scores", str(scores), "--corpus", str(corpus2),
                     "--output-dir", str(out)])
        assert code == 2
        assert "labels" in capsys.readouterr().err

    def test_train_exits_2_on_missing_corpus(self, tmp_path, capsys):
        code = main(["train", "--corpus", str(tmp_path / "missing"), "--output-dir", str(tmp_path)])
        assert code == 2

    def test_rank_without_model_exits_2(self, cli_corpus, tmp_path):
        code = main(["rank", "--corpus", str(cli_corpus), "--output-dir", str(tmp_path / "empty")])
        assert code == 2


class TestRunAndAblate:
    def test_run_command(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "run_out"
        code = main(["run", "--corpus", str(cli_corpus), "--output-dir", str(out),
                     "--folds", "2", *MICRO_ARGS])
        assert code == 0
        assert (out / "metrics.json").exists()
        assert (out / "run_manifest.json").exists()

    def test_ablate_emits_sixteen_cells(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "ablate_out"
        code = main(["ablate", "--corpus", str(cli_corpus), "--output-dir", str(out),
                     "--folds", "2", *MICRO_ARGS])
        assert code == 0
        payload = json.loads((out / "ablation.json").read_text())
        assert len(payload) == 16
        for key in payload:
            assert key.startswith("mode=")


class TestArgErrors:
    def test_unknown_subcommand_exits_2(self):
        assert main(["frobnicate"]) == 2

    def test_missing_required_flag_exits_2(self):
        assert main(["slice"]) == 2
