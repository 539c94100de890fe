import json
import os

import numpy as np
import pytest

from samgog import cli, config


GOOD_CONFIG = """
# synthetic smoke experiment
dataset.kind = planted
dataset.num_graphs = 30
dataset.noise = 0.3
split.rho_class = 1.0
split.seed = 3
alloc.d_bar = 4
alloc.k_min = 2
alloc.k_max = 20
encoder.hidden_dim = 5
downstream.hidden_dim = 5
sampler.samples_per_epoch = 2
epochs = 6
runs = 1
seed = 5
"""


class TestConfigParsing:
    def test_good_config_parses(self):
        cfg = config.parse_config_text(GOOD_CONFIG)
        assert cfg.runs == 1
        assert cfg.epochs == 6
        assert cfg.alloc_config().d_bar == 4.0
        assert cfg.encoder_config().hidden_dim == 5

    def test_missing_d_bar_names_field(self):
        text = GOOD_CONFIG.replace("alloc.d_bar = 4", "")
        with pytest.raises(config.ConfigError, match="alloc.d_bar"):
            config.parse_config_text(text)

    def test_unknown_key_rejected(self):
        with pytest.raises(config.ConfigError, match="alloc.dbar"):
            config.parse_config_text(GOOD_CONFIG + "\nalloc.dbar = 3\n")

    def test_type_error_names_field(self):
        with pytest.raises(config.ConfigError, match="epochs"):
            config.parse_config_text(GOOD_CONFIG.replace("epochs = 6", "epochs = six"))

    def test_tudataset_kind_requires_path(self):
        text = GOOD_CONFIG.replace("dataset.kind = planted", "dataset.kind = tudataset")
        with pytest.raises(config.ConfigError, match="dataset.path"):
            config.parse_config_text(text)

    def test_comments_and_blank_lines_ignored(self):
        cfg = config.parse_config_text("# hi\n\n" + GOOD_CONFIG)
        assert cfg.seed == 5

    def test_overrides_apply(self):
        cfg = config.parse_config_text(GOOD_CONFIG, overrides={"seed": 99})
        assert cfg.seed == 99

    def test_bool_values(self):
        cfg = config.parse_config_text(
            GOOD_CONFIG + "\ndownstream.symmetrize = false\n"
        )
        assert cfg.downstream_config().symmetrize is False


class TestRunExperiment:
    def write_config(self, tmp_path, text=GOOD_CONFIG):
        path = tmp_path / "exp.cfg"
        path.write_text(text)
        return str(path)

    def test_single_run_writes_files_and_exits_zero(self, tmp_path):
        cfg_path = self.write_config(tmp_path)
        out = str(tmp_path / "out")
        status = cli.main(["train", "--config", cfg_path, "--out", out])
        assert status == 0
        assert os.path.exists(os.path.join(out, "metrics.csv"))
        assert os.path.exists(os.path.join(out, "metrics.json"))
        assert os.path.exists(os.path.join(out, "curve_run0.csv"))

    def test_reinvocation_reproduces_csv_bytes(self, tmp_path):
        cfg_path = self.write_config(
            tmp_path, GOOD_CONFIG.replace("runs = 1", "runs = 3")
        )
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        assert cli.main(["train", "--config", cfg_path, "--out", out_a]) == 0
        assert cli.main(["train", "--config", cfg_path, "--out", out_b]) == 0
        for name in ("metrics.csv", "curve_run0.csv", "curve_run2.csv"):
            with open(os.path.join(out_a, name), "rb") as f:
                a = f.read()
            with open(os.path.join(out_b, name), "rb") as f:
                b = f.read()
            assert a == b

    def test_summary_recomputable_from_rows(self, tmp_path):
        cfg_path = self.write_config(
            tmp_path, GOOD_CONFIG.replace("runs = 1", "runs = 3")
        )
        out = str(tmp_path / "out")
        assert cli.main(["train", "--config", cfg_path, "--out", out]) == 0
        with open(os.path.join(out, "metrics.csv")) as f:
            lines = [ln.strip().split(",") for ln in f if ln.strip()]
        header, rows = lines[0], lines[1:]
        run_rows = [r for r in rows if r[0] not in ("mean", "std")]
        mean_row = next(r for r in rows if r[0] == "mean")
        std_row = next(r for r in rows if r[0] == "std")
        values = np.array([[float(x) for x in r[2:]] for r in run_rows])
        assert np.allclose([float(x) for x in mean_row[2:]], values.mean(axis=0),
                           atol=1e-12)
        assert np.allclose([float(x) for x in std_row[2:]], values.std(axis=0),
                           atol=1e-12)
        assert len(run_rows) == 3

    def test_parallel_matches_sequential(self, tmp_path):
        cfg_path = self.write_config(
            tmp_path, GOOD_CONFIG.replace("runs = 1", "runs = 2")
        )
        out_seq = str(tmp_path / "seq")
        out_par = str(tmp_path / "par")
        assert cli.main(["train", "--config", cfg_path, "--out", out_seq]) == 0
        assert (
            cli.main(
                ["train", "--config", cfg_path, "--out", out_par, "--parallel"]
            )
            == 0
        )
        with open(os.path.join(out_seq, "metrics.csv")) as f:
            seq = f.read()
        with open(os.path.join(out_par, "metrics.csv")) as f:
            par = f.read()
        assert seq == par

    def test_dump_flags_write_audit_files(self, tmp_path):
        cfg_path = self.write_config(tmp_path)
        out = str(tmp_path / "out")
        status = cli.main(
            ["train", "--config", cfg_path, "--out", out,
             "--dump-allocation", "--dump-gog"]
        )
        assert status == 0
        alloc_lines = open(os.path.join(out, "allocation.txt")).read().splitlines()
        assert alloc_lines[-1].startswith("total ")
        total = int(alloc_lines[-1].split()[1])
        assert sum(int(ln.split()[1]) for ln in alloc_lines[:-1]) == total
        gog_header = open(os.path.join(out, "gog_eval0.txt")).readline().split()
        assert int(gog_header[0]) == 30  # num_graphs in the fixture

    def test_malformed_config_gives_nonzero_exit(self, tmp_path, capsys):
        cfg_path = self.write_config(
            tmp_path, GOOD_CONFIG.replace("alloc.d_bar = 4", "")
        )
        status = cli.main(["train", "--config", cfg_path, "--out", str(tmp_path)])
        assert status == 1
        assert "alloc.d_bar" in capsys.readouterr().err


class TestOtherSubcommands:
    def write_config(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(GOOD_CONFIG)
        return str(path)

    def test_sweep_homophily_writes_rows(self, tmp_path):
        cfg_path = self.write_config(tmp_path)
        out = str(tmp_path / "out")
        status = cli.main(
            ["sweep-homophily", "--config", cfg_path, "--out", out,
             "--degrees", "2,3,4"]
        )
        assert status == 0
        with open(os.path.join(out, "homophily_sweep.csv")) as f:
            lines = [ln for ln in f.read().splitlines() if ln]
        assert lines[0] == "d_bar,homophily_mean,homophily_std,expected_homophily"
        assert len(lines) == 4
        for ln in lines[1:]:
            vals = [float(x) for x in ln.split(",")]
            assert 0.0 <= vals[1] <= 1.0
            assert 0.0 <= vals[3] <= 1.0

    def test_sweep_homophily_all_same_label_is_one(self, tmp_path):
        # fully labeled identical-class dataset: every sampled edge is
        # homophilous at every degree
        text = GOOD_CONFIG.replace("split.rho_class = 1.0", "split.rho_class = 1.0")
        cfg_path = tmp_path / "one.cfg"
        cfg_path.write_text(text)
        # patch through library call for a same-label dataset
        from samgog import data as data_mod
        from samgog.config import parse_config_text

        cfg = parse_config_text(text)
        ds = data_mod.make_path_graph_dataset([4] * 30, labels=[0] * 30)

        # all labels equal: S is all-ones off the diagonal; homophily 1.0
        import samgog.cli as cli_mod

        orig_load = cli_mod.load_dataset
        orig_split = cli_mod.resolve_split
        cli_mod.load_dataset = lambda c: ds
        cli_mod.resolve_split = lambda c, d: data_mod.SplitSpec(
            train_idx=tuple(range(15)), val_idx=tuple(range(15, 20)),
            test_idx=tuple(range(20, 30)),
        )
        try:
            path = cli_mod.emit_homophily_sweep(cfg, [2, 4], str(tmp_path / "o"))
        finally:
            cli_mod.load_dataset = orig_load
            cli_mod.resolve_split = orig_split
        with open(path) as f:
            rows = [ln.split(",") for ln in f.read().splitlines()[1:] if ln]
        for row in rows:
            assert float(row[1]) == 1.0
            assert float(row[3]) == 1.0

    def test_theory_subcommand_writes_json(self, tmp_path):
        out = str(tmp_path / "out")
        status = cli.main(
            ["theory", "--out", out, "--ordering-trials", "20",
             "--unbiasedness-trials", "300", "--monotonicity-trials", "30",
             "--t-values", "1,2,4", "--replicates", "6", "--seed", "0"]
        )
        with open(os.path.join(out, "theory.json")) as f:
            report = json.load(f)
        assert len(report["checks"]) == 4
        assert status == (0 if report["all_passed"] else 1)

    def test_make_split_and_inspect(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path)
        out = str(tmp_path / "out")
        assert cli.main(["make-split", "--config", cfg_path, "--out", out]) == 0
        split_path = os.path.join(out, "split.txt")
        assert os.path.exists(split_path)
        capsys.readouterr()
        assert cli.main(["inspect-dataset", "--config", cfg_path]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["num_graphs"] == 30
        assert stats["num_classes"] == 2

    def test_split_file_feeds_training(self, tmp_path):
        cfg_path = self.write_config(tmp_path)
        out = str(tmp_path / "out")
        assert cli.main(["make-split", "--config", cfg_path, "--out", out]) == 0
        split_path = os.path.join(out, "split.txt")
        text = GOOD_CONFIG + f"\nsplit.file = {split_path}\n"
        cfg2 = tmp_path / "exp2.cfg"
        cfg2.write_text(text)
        assert cli.main(["train", "--config", str(cfg2), "--out", out]) == 0
