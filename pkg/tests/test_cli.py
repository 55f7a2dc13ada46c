import csv

import numpy as np
import pytest

from adaprune.archive import load_archive, save_archive, save_tensors
from adaprune.cli import PRUNE_CSV_COLUMNS, RESULTS_CSV_COLUMNS, main
from adaprune.dataset import save_dataset, synthetic_dataset
from adaprune.pipeline import weight_sparsity
from adaprune.textmodel import train_toy


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Dataset, two trained candidate models, and a calibration archive."""
    root = tmp_path_factory.mktemp("cli")
    ds = synthetic_dataset(seed=0, vocab_size=24, d_embed=8, n_examples=40, noise=0.3)
    data = root / "data.jsonl"
    save_dataset(ds, data)

    models = []
    for seed in (0, 1):
        model = train_toy(ds, widths=(8, 16, 2), epochs=120, learning_rate=0.5, seed=seed)
        path = root / f"model{seed}.adpr"
        save_archive(model, path)
        models.append(path)

    rng = np.random.default_rng(99)
    feats = np.column_stack(
        [ds.embedding[tokens].mean(axis=0) for tokens, _ in ds.examples]
    )
    calib = root / "calib.adpr"
    save_tensors({"calibration": feats}, calib)
    return {"root": root, "data": data, "models": models, "calib": calib, "ds": ds}


class TestPrune:
    def test_prune_writes_model_and_report(self, workspace, capsys):
        root = workspace["root"]
        out = root / "sparse.adpr"
        report = root / "layers.csv"
        code = main(
            [
                "prune",
                "--model", str(workspace["models"][0]),
                "--calib", str(workspace["calib"]),
                "--sparsity", "0.5",
                "--lambda", "1e-4",
                "--out", str(out),
                "--report", str(report),
            ]
        )
        assert code == 0
        assert "final_output_mse=" in capsys.readouterr().out
        sparse = load_archive(out)
        # Only the hidden layer is prunable: 16x8 of 16x8 + 2x16 weights.
        assert weight_sparsity(sparse) == pytest.approx(64 / 160)
        with open(report) as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0].keys()) == PRUNE_CSV_COLUMNS
        assert len(rows) == 2
        assert float(rows[0]["sparsity"]) == pytest.approx(0.5)
        assert float(rows[1]["sparsity"]) == 0.0

    def test_structured_mode(self, workspace):
        root = workspace["root"]
        out = root / "sparse-nm.adpr"
        code = main(
            [
                "prune",
                "--model", str(workspace["models"][0]),
                "--calib", str(workspace["calib"]),
                "--nm", "2:4",
                "--out", str(out),
            ]
        )
        assert code == 0
        sparse = load_archive(out)
        hidden = sparse.layers[0].weight
        for row in hidden:
            for b in range(hidden.shape[1] // 4):
                assert np.count_nonzero(row[b * 4 : (b + 1) * 4]) == 2

    def test_independent_flag(self, workspace):
        root = workspace["root"]
        out = root / "sparse-ind.adpr"
        code = main(
            [
                "prune",
                "--model", str(workspace["models"][0]),
                "--calib", str(workspace["calib"]),
                "--sparsity", "0.5",
                "--independent",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert load_archive(out).metadata["adaptive"] is False

    def test_missing_target_is_usage_error(self, workspace):
        code = main(
            [
                "prune",
                "--model", str(workspace["models"][0]),
                "--calib", str(workspace["calib"]),
                "--out", str(workspace["root"] / "x.adpr"),
            ]
        )
        assert code == 1

    def test_bad_nm_is_usage_error(self, workspace):
        code = main(
            [
                "prune",
                "--model", str(workspace["models"][0]),
                "--calib", str(workspace["calib"]),
                "--nm", "64",
                "--out", str(workspace["root"] / "x.adpr"),
            ]
        )
        assert code == 1

    def test_missing_file_is_data_error(self, workspace):
        code = main(
            [
                "prune",
                "--model", str(workspace["root"] / "nope.adpr"),
                "--calib", str(workspace["calib"]),
                "--sparsity", "0.5",
                "--out", str(workspace["root"] / "x.adpr"),
            ]
        )
        assert code == 2

    def test_corrupt_archive_is_data_error(self, workspace):
        bad = workspace["root"] / "bad.adpr"
        bad.write_bytes(b"NOPE!\n" + b"\x00" * 32)
        code = main(
            [
                "prune",
                "--model", str(bad),
                "--calib", str(workspace["calib"]),
                "--sparsity", "0.5",
                "--out", str(workspace["root"] / "x.adpr"),
            ]
        )
        assert code == 2

    def test_singular_calibration_is_numerical_error(self, workspace):
        root = workspace["root"]
        thin = root / "thin.adpr"
        save_tensors({"calibration": np.zeros((8, 4))}, thin)
        with pytest.warns(RuntimeWarning):
            code = main(
                [
                    "prune",
                    "--model", str(workspace["models"][0]),
                    "--calib", str(thin),
                    "--sparsity", "0.5",
                    "--lambda", "0",
                    "--out", str(root / "x.adpr"),
                ]
            )
        assert code == 3


class TestEvalAttackReport:
    def test_eval_prints_accuracy(self, workspace, capsys):
        code = main(["eval", "--model", str(workspace["models"][0]), "--data", str(workspace["data"])])
        assert code == 0
        assert "acc=" in capsys.readouterr().out

    def test_attack_appends_results_rows(self, workspace, capsys):
        results = workspace["root"] / "results.csv"
        for model in workspace["models"]:
            code = main(
                [
                    "attack",
                    "--model", str(model),
                    "--data", str(workspace["data"]),
                    "--max-subs", "3",
                    "--out", str(results),
                ]
            )
            assert code == 0
            assert "asr=" in capsys.readouterr().out
        with open(results) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert list(rows[0].keys()) == RESULTS_CSV_COLUMNS

    def test_report_renders_markdown(self, workspace):
        results = workspace["root"] / "results.csv"
        summary = workspace["root"] / "summary.md"
        code = main(["report", "--in", str(results), "--out", str(summary)])
        assert code == 0
        text = summary.read_text()
        assert "| sparsity | acc | aua | asr | model |" in text
        assert text.count("|") > 10

    def test_report_rejects_wrong_columns(self, workspace):
        bad = workspace["root"] / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        code = main(["report", "--in", str(bad), "--out", str(workspace["root"] / "s.md")])
        assert code == 2


class TestSoup:
    def test_soup_clean_eval(self, workspace, capsys):
        out = workspace["root"] / "soup.adpr"
        code = main(
            [
                "soup",
                "--models", *[str(m) for m in workspace["models"]],
                "--eval", "clean",
                "--data", str(workspace["data"]),
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.exists()
        assert "averaged" in capsys.readouterr().out

    def test_soup_attack_eval(self, workspace):
        out = workspace["root"] / "soup-attack.adpr"
        code = main(
            [
                "soup",
                "--models", *[str(m) for m in workspace["models"]],
                "--eval", "attack",
                "--data", str(workspace["data"]),
                "--max-subs", "2",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.exists()


class TestParser:
    def test_no_command_is_usage_error(self):
        assert main([]) == 1

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0
