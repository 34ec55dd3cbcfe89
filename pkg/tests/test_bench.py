import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from disfom.bench import ConfigError, load_config, validate_config
from disfom.bench.cli import main
from disfom.bench.config import BenchConfig
from disfom.sampling import Spider, spider_total_evaluations


def tiny_config(tmp_path, extra=""):
    path = tmp_path / "bench.cfg"
    path.write_text(
        """
[experiment]
dims = 100, 110
methods = DISFOM_minibatch, DISFOM_vr, SGD
replications = 2
base_seed = 77
workers = 1

[minibatch]
m = 12
K = 10

[vr]
q0 = 3
m1 = 12
m = 4
K = 9
"""
        + extra
    )
    return str(path)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults_are_valid(self):
        assert validate_config(load_config(None)) == []

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[experiment]\nbogus = 1\n")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_missing_file_rejected(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/x.cfg")

    def test_unknown_method_fails_validation(self):
        cfg = BenchConfig()
        cfg.methods = ("DISFOM_minibatch", "MAGIC")
        errs = validate_config(cfg)
        assert any("MAGIC" in e for e in errs)

    def test_dim_below_block_fails(self):
        cfg = BenchConfig()
        cfg.dims = (64,)
        assert any("sub_block" in e for e in validate_config(cfg))


class TestSweep:
    def test_outputs_and_relative_normalization(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        out = tmp_path / "out"
        assert main(["sweep", "--config", cfg_path, "--out", str(out)]) == 0
        rows = read_rows(out / "results.csv")
        assert len(rows) == 3 * 2 * 2  # methods x dims x replications
        for row in rows:
            if row["d"] == "100":
                assert float(row["relative_gap"]) == 1.0
                assert float(row["relative_residual"]) == 1.0
        # sample accounting column matches the analytic schedules
        for row in rows:
            if row["method"] == "DISFOM_vr":
                expected = spider_total_evaluations(9, Spider(3, 12, 4))
                assert int(row["total_samples"]) == expected
            else:
                assert int(row["total_samples"]) == 12 * 10
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["failures"] == []
        assert "results.csv" in manifest["deterministic_files"]
        key = "DISFOM_minibatch@110"
        orders = manifest["relative_metric_orders"][key]
        assert set(orders) == {"normalize_then_average", "average_then_normalize"}

    def test_byte_identical_reruns(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(["sweep", "--config", cfg_path, "--out", str(out2)]) == 0
        for name in ("results.csv", "aggregate.csv", "manifest.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_workers_do_not_change_results(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        assert main(["sweep", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(
            ["sweep", "--config", cfg_path, "--out", str(out2), "--workers", "2"]
        ) == 0
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()

    def test_seed_flag_changes_outputs(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(["sweep", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(
            ["sweep", "--config", cfg_path, "--out", str(out2), "--seed", "123"]
        ) == 0
        assert (out1 / "results.csv").read_bytes() != (out2 / "results.csv").read_bytes()

    def test_invalid_config_exit_code(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[experiment]\nmethods = NOPE\ndims = 100\n")
        assert main(["sweep", "--config", str(p), "--out", str(tmp_path / "x")]) == 1


class TestRace:
    def test_race_outputs(self, tmp_path):
        p = tmp_path / "race.cfg"
        p.write_text("[race]\ndims = 64\ntrials = 3\n")
        out = tmp_path / "out"
        assert main(["race", "--config", str(p), "--out", str(out)]) == 0
        trials = read_rows(out / "race_trials.csv")
        assert len(trials) == 2 * 1 * 3  # families x dims x trials
        for row in trials:
            # cross-validation column: the box family converges under its
            # 100x budget; the l1+box family may hit the 10x cap (recorded)
            if row["family"] == "box":
                assert abs(float(row["objective_gap"])) <= 1e-6 * (
                    1.0 + abs(float(row["objective_specialized"]))
                )
            assert float(row["time_specialized_sec"]) > 0.0
            assert float(row["time_admm_sec"]) > 0.0
        agg = read_rows(out / "race.csv")
        assert len(agg) == 2 * 1 * 2  # families x dims x solvers
        assert all(row["trials"] == "3" for row in agg)
        by = {(r["family"], r["solver"]): float(r["mean_time_sec"]) for r in agg}
        assert by[("box", "specialized")] < by[("box", "admm")]


class TestPlotData:
    def test_figure_tables(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        out = tmp_path / "out"
        main(["sweep", "--config", cfg_path, "--out", str(out)])
        assert main(["plotdata", "--out", str(out)]) == 0
        fig2 = read_rows(out / "fig2_minibatch.csv")
        assert len(fig2) == 2 * 2  # dims x minibatch-group methods present
        base = [r for r in fig2 if float(r["log2_d"]) == np.log2(100)]
        for row in base:
            assert float(row["mean_relative_metric"]) == 1.0
        fig2vr = read_rows(out / "fig2_vr.csv")
        assert {r["method"] for r in fig2vr} == {"DISFOM_vr"}

    def test_missing_inputs_error(self, tmp_path):
        assert main(["plotdata", "--out", str(tmp_path / "empty")]) == 1


class TestCli:
    def test_validate_config_ok(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        assert main(["validate-config", "--config", cfg_path]) == 0

    def test_validate_config_failure(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[experiment]\nreplications = 0\n")
        assert main(["validate-config", "--config", str(p)]) == 1

    def test_console_script_installed(self):
        proc = subprocess.run(
            [sys.executable, "-m", "disfom.bench.cli", "validate-config"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "config ok" in proc.stdout
