import json

import numpy as np
import pytest

from dflkit.cli import main
from dflkit.datagen import load_dataset


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "ds"
    rc = main(["datagen", "--problem", "grid", "--grid", "2x3", "--features", "3",
               "--deg", "2", "--noise", "0.5", "--train", "12", "--val", "6",
               "--test", "8", "--seed", "7", "--out", str(out)])
    assert rc == 0
    return out


class TestDatagenCommand:
    def test_splits_written(self, small_data):
        for split, t in (("train", 12), ("val", 6), ("test", 8)):
            ds = load_dataset(small_data / split)
            assert ds.meta.t == t and ds.meta.instance == "grid:2x3"

    def test_tsp_descriptor_roundtrips(self, tmp_path):
        out = tmp_path / "tspds"
        rc = main(["datagen", "--problem", "tsp", "--nodes", "5", "--features", "2",
                   "--deg", "2", "--noise", "0", "--train", "4", "--val", "3",
                   "--test", "3", "--seed", "1", "--out", str(out)])
        assert rc == 0
        ds = load_dataset(out / "train")
        assert ds.meta.instance.startswith("tsp:5,coords=")
        assert ds.meta.n == 10

    def test_determinism(self, tmp_path):
        args = ["datagen", "--problem", "grid", "--grid", "2x2", "--features", "2",
                "--deg", "2", "--noise", "0.3", "--train", "5", "--val", "3",
                "--test", "3", "--seed", "9"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        for split in ("train", "val", "test"):
            for name in ("features.csv", "costs.csv", "clean_costs.csv", "meta.json"):
                assert (a / split / name).read_bytes() == (b / split / name).read_bytes()


class TestTrainEval:
    def test_train_writes_model(self, small_data, tmp_path):
        model = tmp_path / "model.json"
        rc = main(["train", "--data", str(small_data), "--method", "spo+",
                   "--loss", "knn", "--k", "3", "--w", "0.5", "--epochs", "3",
                   "--batch", "8", "--seed", "0", "--out", str(model)])
        assert rc == 0
        payload = json.loads(model.read_text())
        assert payload["config"]["policy"]["kind"] == "knn"
        assert len(payload["history"]) == 3
        assert np.array(payload["theta"]).shape == (7, 3)

    def test_train_byte_identical(self, small_data, tmp_path):
        args = ["train", "--data", str(small_data), "--method", "pfyl",
                "--loss", "emp", "--epochs", "2", "--seed", "4"]
        m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
        assert main(args + ["--out", str(m1)]) == 0
        assert main(args + ["--out", str(m2)]) == 0
        assert m1.read_bytes() == m2.read_bytes()

    def test_pfl_baseline(self, small_data, tmp_path):
        model = tmp_path / "pfl.json"
        rc = main(["train", "--data", str(small_data), "--method", "pfl",
                   "--epochs", "2", "--out", str(model)])
        assert rc == 0
        payload = json.loads(model.read_text())
        assert payload["config"]["method"] == "mse"
        assert payload["audit"]["gradient"] == 0

    def test_eval_report(self, small_data, tmp_path):
        model = tmp_path / "model.json"
        assert main(["train", "--data", str(small_data), "--method", "spo+",
                     "--loss", "emp", "--epochs", "2", "--out", str(model)]) == 0
        report = tmp_path / "report.json"
        rc = main(["eval", "--data", str(small_data), "--model", str(model),
                   "--split", "test", "--report", str(report)])
        assert rc == 0
        payload = json.loads(report.read_text())
        assert payload["split"] == "test"
        assert len(payload["per_sample_regret"]) == 8
        assert payload["normalized_regret_pct"] >= 0.0
        assert payload["expected_normalized_regret_pct"] is not None


class TestSweepCommand:
    def test_tiny_sweep(self, tmp_path):
        cfg = {
            "problems": [{"kind": "grid", "v": 2, "h": 2}],
            "t_values": [6],
            "noise_values": [0.5],
            "methods": ["spo+", "mse"],
            "policies": [{"kind": "empirical"}, {"kind": "topk", "k": 2}],
            "seeds": [0, 1],
            "epochs_by_t": {"6": 2},
            "features": 2,
            "degree": 2,
            "val_size": 3,
            "test_size": 4,
        }
        cfg_path = tmp_path / "sweep.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "results.csv"
        rc = main(["sweep", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        # header + 3 groups x 2 seeds detail + 3 aggregates
        assert len(lines) == 1 + 6 + 3


class TestBiasDemoCommand:
    def test_output(self, tmp_path, capsys):
        out = tmp_path / "bias.json"
        rc = main(["bias-demo", "--nh", "2", "--nl", "2", "--sigma-h", "1.0",
                   "--sigma-l", "1e-6", "--trials", "2000", "--seed", "0",
                   "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert sum(payload["counts"]) == 2000
        assert payload["high_mean_freq"] > payload["low_mean_freq"]


class TestErrorHandling:
    def test_missing_data_dir(self, tmp_path, capsys):
        rc = main(["train", "--data", str(tmp_path / "nope"), "--method", "spo+",
                   "--epochs", "1", "--out", str(tmp_path / "m.json")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_flags(self):
        with pytest.raises(SystemExit):
            main(["train", "--method", "nonsense"])
