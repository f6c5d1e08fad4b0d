import json
import os

import numpy as np
import pytest

from mpcnn.config import ExperimentConfig, desk_type1_config, desk_type2_config
from mpcnn.datagen import ScenarioSpace, build_dataset
from mpcnn.harness import (
    ResultKey,
    ResultTable,
    emit_heatmaps,
    emit_results,
    run_type1,
    run_type2,
)
from mpcnn.model import build_model


def tiny_cfg(**kw):
    base = dict(
        cn0_list=(50.0,),
        dtheta_list_deg=(0.0,),
        n_list=(4, 6),
        runs=1,
        train_per_class=8,
        test_per_class=4,
        epochs=1,
        w_epochs=4,
        seed=3,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_json_roundtrip(self, tmp_path):
        cfg = tiny_cfg()
        p = tmp_path / "cfg.json"
        cfg.to_json(p)
        assert ExperimentConfig.from_json(p) == cfg

    def test_full_scale(self):
        cfg = desk_type1_config().full_scale()
        assert cfg.runs == 20
        assert cfg.train_per_class == 2000
        assert len(cfg.n_list) == 7

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ti_ms=5.0)
        with pytest.raises(ValueError):
            ExperimentConfig(cn0_list=())
        with pytest.raises(ValueError):
            ExperimentConfig(runs=0)

    def test_desk_defaults(self):
        assert desk_type1_config().cn0_list == (40.0,)
        assert desk_type2_config().cn0_list == (20.0, 30.0, 40.0, 50.0, 60.0)


class TestCampaigns:
    def test_type1_cartesian_rows(self):
        table = run_type1(tiny_cfg())
        assert len(table.rows) == 2  # two discretization levels
        for key in table.rows:
            assert key.experiment == "type1"
            assert key.model == "MultipathCNN"
            assert len(table.accuracies(key)) == 1

    def test_type1_deterministic(self):
        a = run_type1(tiny_cfg()).to_csv_text()
        b = run_type1(tiny_cfg()).to_csv_text()
        assert a == b

    def test_type2_rows_per_model(self):
        cfg = tiny_cfg(dtheta_list_deg=(0.0, 90.0), n_list=(4,))
        table = run_type2(cfg)
        models = {k.model for k in table.rows}
        assert models == {"MultipathCNN", "SVM"}
        assert len(table.rows) == 4  # 2 dthetas x 2 models
        for key in table.rows:
            assert key.n_discr == cfg.n_type2

    def test_accuracies_in_range(self):
        table = run_type2(tiny_cfg())
        for key in table.rows:
            assert 0.0 <= table.mean_pct(key) <= 100.0
            assert 0.0 <= table.std_pct(key) <= 50.0


class TestEmission:
    def make_table(self):
        t = ResultTable()
        k1 = ResultKey("type2", 1.0, 50.0, 0.0, 10, "MultipathCNN")
        k2 = ResultKey("type2", 1.0, 50.0, 0.0, 10, "SVM")
        for acc in (0.9985, 0.9985, 1.0):
            t.add(k1, acc)
        for acc in (0.61, 0.72, 0.65):
            t.add(k2, acc)
        return t

    def test_csv_schema_and_format(self, tmp_path):
        written = emit_results(self.make_table(), tmp_path)
        csv_path = written[0]
        lines = open(csv_path).read().strip().split("\n")
        assert lines[0] == (
            "experiment,ti_ms,cn0_dbhz,dtheta_deg,n_discr,model,"
            "acc_mean_pct,acc_std_pct,n_runs"
        )
        assert len(lines) == 3
        cnn = lines[1].split(",")
        assert cnn[:6] == ["type2", "1", "50", "0", "10", "MultipathCNN"]
        assert cnn[6] == "99.90"  # mean of 99.85, 99.85, 100.00
        assert cnn[8] == "3"

    def test_reemission_identical_bytes(self, tmp_path):
        t = self.make_table()
        emit_results(t, tmp_path)
        first = open(os.path.join(tmp_path, "results.csv"), "rb").read()
        emit_results(t, tmp_path)
        second = open(os.path.join(tmp_path, "results.csv"), "rb").read()
        assert first == second

    def test_empty_table_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_results(ResultTable(), tmp_path)


class TestHeatmapEmission:
    def test_k1_two_sample_dirs(self, tmp_path):
        ds = build_dataset(ScenarioSpace(ti=1e-3, cn0_dbhz=50.0, n=8), 3, seed=1)
        model = build_model(8, seed=0)
        emit_heatmaps(model, ds, 1, tmp_path)
        dirs = sorted(os.listdir(tmp_path))
        assert dirs == ["label0_sample0", "label1_sample0"]
        heat = np.loadtxt(tmp_path / "label0_sample0" / "heatmap.csv", delimiter=",")
        assert heat.shape == (8, 8)
        assert heat.min() >= 0.0 and heat.max() <= 1.0


class TestCli:
    def run_cli(self, *argv):
        from mpcnn.cli import main

        return main(list(argv))

    def test_generate_and_eval_flow(self, tmp_path, capsys):
        out = str(tmp_path)
        assert (
            self.run_cli(
                "--out", out, "--seed", "1",
                "generate", "--n", "8", "--per-class", "6", "--name", "train.gmpd",
            )
            == 0
        )
        assert (
            self.run_cli(
                "--out", out, "--seed", "2",
                "generate", "--n", "8", "--per-class", "3", "--name", "test.gmpd",
            )
            == 0
        )
        assert (
            self.run_cli(
                "--out", out, "--seed", "5",
                "train-cnn", "--train", f"{out}/train.gmpd", "--val", f"{out}/test.gmpd",
            )
            == 0
        )
        assert os.path.exists(f"{out}/multipath_cnn.gmpw")
        assert os.path.exists(f"{out}/train_report.csv")
        assert (
            self.run_cli(
                "--out", out,
                "eval", "--checkpoint", f"{out}/multipath_cnn.gmpw",
                "--data", f"{out}/test.gmpd",
            )
            == 0
        )
        assert "accuracy" in capsys.readouterr().out

    def test_train_svm(self, tmp_path, capsys):
        out = str(tmp_path)
        code = self.run_cli(
            "--out", out, "--seed", "3",
            "train-svm", "--cn0", "50", "--per-class", "12",
        )
        assert code == 0
        assert os.path.exists(f"{out}/svm_model.json")

    def test_experiment_type2_deterministic(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        tiny_cfg(n_list=(4,)).to_json(cfg_path)
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (out_a, out_b):
            assert (
                self.run_cli(
                    "--config", str(cfg_path), "--seed", "7", "--out", out,
                    "experiment", "type2",
                )
                == 0
            )
        bytes_a = open(f"{out_a}/results.csv", "rb").read()
        bytes_b = open(f"{out_b}/results.csv", "rb").read()
        assert bytes_a == bytes_b

    def test_heatmap_command(self, tmp_path):
        out = str(tmp_path)
        self.run_cli("--out", out, "--seed", "1",
                     "generate", "--n", "8", "--per-class", "4")
        self.run_cli("--out", out, "--seed", "2",
                     "train-cnn", "--train", f"{out}/dataset.gmpd")
        heat_out = f"{out}/maps"
        code = self.run_cli(
            "--out", heat_out,
            "heatmap", "--checkpoint", f"{out}/multipath_cnn.gmpw",
            "--data", f"{out}/dataset.gmpd", "--k", "1",
        )
        assert code == 0
        assert sorted(os.listdir(heat_out)) == ["label0_sample0", "label1_sample0"]
