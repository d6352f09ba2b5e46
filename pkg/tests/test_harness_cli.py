import json
import os

import numpy as np
import pytest

from perturbench.cli import main
from perturbench.dataset import generate_toy_dataset, load_labeled_dir
from perturbench.harness import (
    ExperimentConfig,
    attack_images,
    select_clean_correct,
    train_models,
    transfer_matrix,
)
from perturbench.attacks import AttackSpec
from perturbench.image import save_image
from perturbench.metrics import asr


SMALL_CFG = {
    "models": ["linear_softmax"],
    "attacks": [{"kind": "fgsm", "epsilon": 8 / 255}],
    "defenses": ["ss", "jpeg"],
    "sample_count": 6,
    "n_train": 200,
    "n_test": 100,
    "master_seed": 3,
    "train": {"linear_softmax": {"epochs": 6, "learning_rate": 0.1}},
}


def write_cfg(tmp_path, cfg=None, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg or SMALL_CFG))
    return str(path)


class TestDataset:
    def test_same_seed_bitwise_identical(self):
        a = generate_toy_dataset(5, 50, 30)
        b = generate_toy_dataset(5, 50, 30)
        assert np.array_equal(a.train_x, b.train_x)
        assert np.array_equal(a.test_x, b.test_x)
        assert np.array_equal(a.train_y, b.train_y)

    def test_exact_class_balance(self):
        ds = generate_toy_dataset(1, 100, 50)
        np.testing.assert_array_equal(np.bincount(ds.train_y), [10] * 10)
        np.testing.assert_array_equal(np.bincount(ds.test_y), [5] * 10)

    def test_values_in_domain(self):
        ds = generate_toy_dataset(2, 20, 10)
        assert ds.train_x.min() >= 0.0 and ds.train_x.max() <= 1.0

    def test_counts_validated(self):
        with pytest.raises(ValueError):
            generate_toy_dataset(0, 0, 10)

    def test_labeled_dir_ingestion(self, tmp_path):
        ds = generate_toy_dataset(3, 10, 10)
        for i in range(4):
            save_image(tmp_path / f"im{i}.png", ds.train_x[i])
        (tmp_path / "labels.csv").write_text(
            "filename,label\n" + "\n".join(f"im{i}.png,{ds.train_y[i]}" for i in range(4)))
        xs, ys = load_labeled_dir(tmp_path)
        assert xs.shape == (4, 32, 32, 3)
        np.testing.assert_array_equal(ys, ds.train_y[:4])


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = dict(SMALL_CFG)
        cfg["bogus"] = 1
        with pytest.raises(ValueError):
            ExperimentConfig.from_json(cfg)

    def test_unknown_train_key_rejected(self):
        cfg = dict(SMALL_CFG)
        cfg["train"] = {"linear_softmax": {"lr": 0.1}}
        with pytest.raises(ValueError):
            ExperimentConfig.from_json(cfg)

    def test_empty_models_rejected(self):
        cfg = dict(SMALL_CFG)
        cfg["models"] = []
        with pytest.raises(ValueError):
            ExperimentConfig.from_json(cfg)


class TestSelection:
    def test_selected_set_correct_on_all_models(self):
        cfg = ExperimentConfig.from_json(SMALL_CFG)
        ds = generate_toy_dataset(cfg.master_seed, cfg.n_train, cfg.n_test)
        models, _ = train_models(cfg, ds)
        xs, ys, _ = select_clean_correct(models, ds, 5)
        for m in models.values():
            np.testing.assert_array_equal(m.predict_batch(xs), ys)

    def test_zero_count_rejected(self):
        cfg = ExperimentConfig.from_json(SMALL_CFG)
        ds = generate_toy_dataset(cfg.master_seed, cfg.n_train, cfg.n_test)
        models, _ = train_models(cfg, ds)
        with pytest.raises(ValueError):
            select_clean_correct(models, ds, 0)

    def test_insufficient_samples_error_reports_count(self):
        cfg = ExperimentConfig.from_json(SMALL_CFG)
        ds = generate_toy_dataset(cfg.master_seed, cfg.n_train, cfg.n_test)
        models, _ = train_models(cfg, ds)
        with pytest.raises(ValueError, match=r"\d+ clean-correct"):
            select_clean_correct(models, ds, 10 ** 6)


class TestTransferMatrix:
    def test_single_model_diagonal_equals_asr(self):
        cfg = ExperimentConfig.from_json(SMALL_CFG)
        ds = generate_toy_dataset(cfg.master_seed, cfg.n_train, cfg.n_test)
        models, _ = train_models(cfg, ds)
        xs, ys, _ = select_clean_correct(models, ds, 6)
        spec = cfg.attacks[0]
        tm = transfer_matrix(models, spec, xs, ys, cfg.master_seed)
        results = attack_images(list(models.values())[0], spec, xs, ys, cfg.master_seed)
        assert tm.grid.shape == (1, 1)
        assert tm.grid[0, 0] == asr(results)


class TestCli:
    def test_grid_creates_outputs_and_reruns_identically(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert main(["grid", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(["grid", "--config", cfg_path, "--out", str(out2)]) == 0
        assert (out1 / "report.csv").exists()
        assert (out1 / "report.json").exists()
        assert (out1 / "heatmaps" / "linear_softmax_fgsm.pgm").exists()
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["grid", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_malformed_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["grid", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = dict(SMALL_CFG)
        cfg["mystery"] = True
        assert main(["grid", "--config", write_cfg(tmp_path, cfg),
                     "--out", str(tmp_path / "o")]) == 2

    def test_unknown_subcommand_exits_2(self):
        assert main(["frobnicate"]) == 2

    def test_defend_roundtrip(self, tmp_path):
        ds = generate_toy_dataset(1, 10, 10)
        src = tmp_path / "in.png"
        dst = tmp_path / "out.png"
        save_image(src, ds.test_x[0])
        assert main(["defend", "--kind", "ss", "--in", str(src), "--out", str(dst)]) == 0
        assert dst.exists()

    def test_train_writes_checkpoints_and_history(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        out = tmp_path / "t"
        assert main(["train", "--config", cfg_path, "--out", str(out)]) == 0
        assert (out / "linear_softmax.ckpt").exists()
        assert (out / "history.json").exists()

    def test_report_prints_table(self, tmp_path, capsys):
        cfg_path = write_cfg(tmp_path)
        out = tmp_path / "r"
        main(["grid", "--config", cfg_path, "--out", str(out)])
        assert main(["report", "--in", str(out)]) == 0
        captured = capsys.readouterr()
        assert "fgsm" in captured.out

    def test_grid_null_attack_row(self, tmp_path):
        cfg = dict(SMALL_CFG)
        cfg["attacks"] = [{"kind": "fgsm", "epsilon": 0.0}]
        cfg["defenses"] = ["identity"]
        out = tmp_path / "n"
        assert main(["grid", "--config", write_cfg(tmp_path, cfg, "n.json"),
                     "--out", str(out)]) == 0
        rep = json.loads((out / "report.json").read_text())
        cell = rep["cells"][0]
        assert cell["asr"] == 0.0
        assert cell["undefended_top1"] == 0.0
        assert cell["top1_err"]["identity"] == 0.0
        assert cell["quality"]["psnr_db"] == "inf"  # identical images
