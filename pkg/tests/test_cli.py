import json
import math

import pytest

from microdp.cli import main

CONFIG = """
seed = 17

[dataset]
size = 200
classes = 2
dimension = 4
spread = 1.0
label_noise = 0.1

[model]
kind = "softmax"

[train]
optimizer = "edpsgd"
update = "adam"
learning_rate = 0.05
epochs = 4
batch_size = 20

[dp]
clip_norm = 1.0
noise_multiplier = 1.0
decay = "exp"
decay_rate = 0.1
workers = 4

[privacy]
delta = 1e-4

[output]
report = "{report}"
"""


@pytest.fixture()
def config_file(tmp_path):
    report = tmp_path / "run.json"
    path = tmp_path / "exp.toml"
    path.write_text(CONFIG.replace("{report}", str(report).replace("\\", "/")))
    return path, report


class TestTrain:
    def test_writes_report_and_checkpoint(self, config_file, capsys):
        config_path, report_path = config_file
        assert main(["train", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "epsilon" in out
        report = json.loads(report_path.read_text())
        assert report["train"]["final_train_accuracy"] > 0
        assert (report_path.parent / report["checkpoint"]).exists()

    def test_seed_override_changes_results(self, config_file):
        config_path, report_path = config_file
        main(["train", str(config_path)])
        first = json.loads(report_path.read_text())
        main(["train", str(config_path), "--seed", "99"])
        second = json.loads(report_path.read_text())
        assert first["config"]["seed"] != second["config"]["seed"]
        assert first["train"]["epoch_loss"] != second["train"]["epoch_loss"]

    def test_out_override(self, config_file, tmp_path):
        config_path, _ = config_file
        other = tmp_path / "elsewhere" / "r.json"
        assert main(["train", str(config_path), "--out", str(other)]) == 0
        assert other.exists()

    def test_bad_config_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[dataset]\nsize = 1\nclasses = 9\ndimension = 0\nspread = 0.0\n")
        assert main(["train", str(bad)]) == 1
        assert "bad-config" in capsys.readouterr().err

    def test_missing_config_exits_one(self, tmp_path):
        assert main(["train", str(tmp_path / "absent.toml")]) == 1


class TestAttack:
    def test_attack_amends_report(self, config_file, capsys):
        config_path, report_path = config_file
        main(["train", str(config_path)])
        assert main(["attack", str(config_path)]) == 0
        report = json.loads(report_path.read_text())
        assert 0.0 <= report["attack"]["auc"] <= 1.0

    def test_attack_without_target_exits_two(self, config_file, capsys):
        config_path, _ = config_file
        assert main(["attack", str(config_path)]) == 2
        assert "no-target" in capsys.readouterr().err

    def test_attack_to_separate_output(self, config_file, tmp_path):
        config_path, report_path = config_file
        main(["train", str(config_path)])
        out = tmp_path / "attacked.json"
        assert main(["attack", str(config_path), "--out", str(out)]) == 0
        assert "attack" in json.loads(out.read_text())
        assert "attack" not in json.loads(report_path.read_text())


class TestBench:
    def test_bench_writes_table(self, config_file, tmp_path, capsys):
        config_path, _ = config_file
        out = tmp_path / "bench.json"
        assert main(["bench", str(config_path), "--repetitions", "3",
                     "--out", str(out)]) == 0
        table = json.loads(out.read_text())
        assert set(table["optimizers"]) == {"sgd", "dpsgd", "edpsgd"}
        printed = capsys.readouterr().out
        assert "grad evals" in printed


class TestAccount:
    def test_matches_accountant(self, capsys):
        assert main([
            "account", "--noise-multiplier", "1.0", "--epochs", "1",
            "--steps-per-epoch", "1", "--delta", "1e-5",
        ]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["rho"] == 0.5
        assert payload["epsilon"] == pytest.approx(5.298525912188081, abs=1e-12)
        assert payload["log10_epsilon"] == pytest.approx(math.log10(payload["epsilon"]))

    def test_decay_increases_epsilon(self, capsys):
        main(["account", "--noise-multiplier", "1.0", "--epochs", "5",
              "--steps-per-epoch", "10", "--delta", "1e-5"])
        flat = json.loads(capsys.readouterr().out)["epsilon"]
        main(["account", "--noise-multiplier", "1.0", "--decay", "linear",
              "--decay-rate", "0.5", "--epochs", "5", "--steps-per-epoch", "10",
              "--delta", "1e-5"])
        decayed = json.loads(capsys.readouterr().out)["epsilon"]
        assert decayed > flat

    def test_zero_noise_exits_two(self, capsys):
        code = main(["account", "--noise-multiplier", "0.0", "--epochs", "1",
                     "--steps-per-epoch", "1", "--delta", "1e-5"])
        assert code == 2
        assert "infinite-privacy-loss" in capsys.readouterr().err
