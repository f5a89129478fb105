"""Config parsing, sweep expansion, the CLI subcommands and their files."""

import json
from pathlib import Path

import numpy as np
import pytest

from levyfpe import BoundaryCondition, ConfigError, parse_config
from levyfpe.cli import (EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER,
                         convergence_table, bench_table, main)
from levyfpe.scenarios import RECIPES, figure_recipe, named_recipe

MINIMAL = """
alpha = 0.5
beta = 0.5
J = 100
t_final = 1
"""

SMALL_RUN = """
alpha = 0.5
beta = 0.5
epsilon = 1
sigma = 0
b = 1
J = 16
t_final = 0.25
snapshot_times = 0.125, 0.25
solver = dense_lu
"""


class TestParseConfig:
    def test_minimal_defaults(self):
        ((label, cfg),) = parse_config(MINIMAL)
        assert label == ""
        assert cfg.dt is None and cfg.dt_value == 0.5 / 100
        assert cfg.bc == BoundaryCondition.ABSORBING
        assert cfg.scheme == "backward_euler"
        assert cfg.drift.kind == "zero"
        assert cfg.ic.kind == "gaussian"

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(MINIMAL + "\nwidth = 3\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(MINIMAL + "\nalpha = 0.7\n")

    def test_alpha_out_of_range(self):
        with pytest.raises(ConfigError, match="alpha"):
            parse_config("alpha = 2.5\nbeta = 0\nJ = 16\nt_final = 1\n")

    def test_alpha_two_message(self):
        with pytest.raises(ConfigError, match="epsilon = 0"):
            parse_config("alpha = 2\nbeta = 0\nJ = 16\nt_final = 1\n")

    def test_sigma_and_sigma2_exclusive(self):
        with pytest.raises(ConfigError, match="mutually exclusive"):
            parse_config(MINIMAL + "\nsigma = 1\nsigma2 = 1\n")

    def test_sigma2_sweep(self):
        entries = parse_config(MINIMAL + "\nsigma2 = 0, 0.3, 0.7, 1\n")
        assert len(entries) == 4
        sigmas = [cfg.sigma for _, cfg in entries]
        assert sigmas == pytest.approx([0.0, np.sqrt(0.3), np.sqrt(0.7), 1.0])
        assert entries[1][0] == f"sigma={np.sqrt(0.3):g}"

    def test_cartesian_sweep_labels(self):
        entries = parse_config(MINIMAL + "\ndrift = zero, linear:-0.6\nb = 1, 2\n")
        assert len(entries) == 4
        labels = [label for label, _ in entries]
        assert "b=1_drift=zero" in labels
        assert "b=2_drift=linear_-0.6" in labels

    def test_snapshot_beyond_horizon(self):
        with pytest.raises(ConfigError, match="snapshot"):
            parse_config(MINIMAL + "\nsnapshot_times = 2\n")

    def test_bad_drift(self):
        with pytest.raises(ConfigError, match="drift"):
            parse_config(MINIMAL + "\ndrift = quadratic:1\n")

    def test_bad_scheme(self):
        with pytest.raises(ConfigError, match="scheme"):
            parse_config(MINIMAL + "\nscheme = leapfrog\n")

    def test_ic_variants(self):
        text = MINIMAL + "\nic = gaussian:0.5:40, gaussian:-0.5:40\n"
        entries = parse_config(text)
        assert [cfg.ic.center for _, cfg in entries] == [0.5, -0.5]

    def test_tabulated_drift_from_file(self, tmp_path):
        x = np.linspace(-1.5, 1.5, 31)
        table = tmp_path / "drift.csv"
        np.savetxt(table, np.column_stack([x, -0.6 * x, np.full_like(x, -0.6)]),
                   delimiter=",")
        ((_, cfg),) = parse_config(MINIMAL + f"\ndrift = table:{table}\n")
        assert cfg.drift.kind == "tabulated"
        assert cfg.drift.f(0.5) == pytest.approx(-0.3)


class TestRecipes:
    def test_figure_recipes_parse(self):
        expected_entries = {2: 1, 3: 2, 4: 8, 5: 8, 6: 8, 7: 6, 8: 4, 9: 4}
        for n, count in expected_entries.items():
            entries = parse_config(figure_recipe(n))
            assert len(entries) == count, f"figure {n}"

    def test_named_recipes_parse(self):
        for name in RECIPES:
            assert parse_config(named_recipe(name))

    def test_unknown_figure(self):
        with pytest.raises(ConfigError):
            figure_recipe(1)

    def test_timing_recipe_parameters_exact(self):
        ((_, cfg),) = parse_config(named_recipe("timing"))
        assert (cfg.alpha, cfg.beta, cfg.epsilon, cfg.sigma) == (0.5, 0.5, 1.0, 0.0)
        assert cfg.drift.kind == "zero"
        assert cfg.dt == 1.0 / 1600.0
        assert cfg.ic.kind == "gaussian" and cfg.ic.rate == 40.0

    def test_docs_copies_in_sync(self):
        docs = Path(__file__).resolve().parents[1] / "docs" / "recipes"
        for name, text in RECIPES.items():
            assert (docs / f"{name}.cfg").read_text() == text


class TestRunCommand:
    def write_cfg(self, tmp_path, text=SMALL_RUN):
        cfg = tmp_path / "scenario.cfg"
        cfg.write_text(text)
        return cfg

    def test_writes_snapshots_and_report(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        files = sorted(p.name for p in out.iterdir())
        assert files == ["report.json", "snap_t0.125000.csv", "snap_t0.250000.csv"]
        report = json.loads((out / "report.json").read_text())
        assert report["max_principle"]["margin"] > 0.0
        assert report["positivity_preserving"] is True
        assert report["mass_monotone"] is True
        assert [s["t"] for s in report["snapshots"]] == [0.0, 0.125, 0.25]
        for snap in report["snapshots"]:
            assert {"mass", "min", "max", "argmax_index", "argmax_x"} <= set(snap)

    def test_csv_roundtrip_and_determinism(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(cfg), "--out", str(out1)])
        main(["run", "--config", str(cfg), "--out", str(out2)])
        name = "snap_t0.250000.csv"
        bytes1 = (out1 / name).read_bytes()
        assert bytes1 == (out2 / name).read_bytes()
        rows = bytes1.decode().strip().splitlines()[1:]
        parsed = np.array([[float(tok) for tok in row.split(",")] for row in rows])
        # 17 significant digits: values survive the round trip exactly
        from levyfpe import parse_config as pc
        ((_, scenario),) = pc(self.write_cfg(tmp_path).read_text())
        op = scenario.build_operator()
        from levyfpe import run as run_fn
        traj = run_fn(op, scenario.initial_values(op), scenario.stepper_config())
        assert np.array_equal(parsed[:, 0], op.x_nodes)
        assert np.array_equal(parsed[:, 1], traj.final().values)

    def test_empty_snapshot_list_writes_final_only(self, tmp_path):
        text = SMALL_RUN.replace("snapshot_times = 0.125, 0.25\n", "")
        cfg = self.write_cfg(tmp_path, text)
        out = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out)])
        csvs = sorted(p.name for p in out.glob("*.csv"))
        assert csvs == ["snap_t0.250000.csv"]

    def test_long_format(self, tmp_path):
        cfg = self.write_cfg(tmp_path, SMALL_RUN + "formats = csv, long\n")
        out = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out)])
        lines = (out / "long.csv").read_text().strip().splitlines()
        assert lines[0] == "t,x,p"
        assert len(lines) == 1 + 2 * 31  # two snapshots, n = 31 nodes

    def test_sweep_subdirectories(self, tmp_path):
        cfg = self.write_cfg(tmp_path, SMALL_RUN.replace("b = 1\n", "b = 1, 2\n"))
        out = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out)])
        assert (out / "b=1" / "report.json").exists()
        assert (out / "b=2" / "report.json").exists()

    def test_sweep_with_workers(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LEVYFPE_WORKERS", "2")
        cfg = self.write_cfg(tmp_path,
                             SMALL_RUN.replace("beta = 0.5\n", "beta = 0, 0.5\n"))
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert (out / "beta=0" / "report.json").exists()
        assert (out / "beta=0.5" / "report.json").exists()

    def test_negativity_warning_in_report(self, tmp_path):
        text = """
alpha = 0.5
beta = 0.5
J = 100
drift = linear:-1
scheme = forward_euler
dt = 0.008
t_final = 0.8
snapshot_times = 0.8
"""
        cfg = self.write_cfg(tmp_path, text)
        out = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out)])
        report = json.loads((out / "report.json").read_text())
        assert report["positivity_preserving"] is False
        assert any("positivity" in w for w in report["warnings"])
        assert any("negativity" in w for w in report["warnings"])

    def test_config_error_exit_code(self, tmp_path):
        cfg = self.write_cfg(tmp_path, "alpha = 2.5\nbeta = 0\nJ = 16\nt_final = 1\n")
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG

    def test_missing_config_exit_code(self):
        assert main(["run", "--config", "/nonexistent.cfg"]) == EXIT_CONFIG

    def test_io_error_exit_code(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        blocker = tmp_path / "blocked"
        blocker.write_text("")
        assert main(["run", "--config", str(cfg), "--out", str(blocker)]) == EXIT_IO

    def test_solver_failure_exit_code(self, tmp_path):
        text = SMALL_RUN.replace(
            "solver = dense_lu",
            "solver = matrix_free\nsolver_max_iter = 1\nsolver_restart = 1\n"
            "precondition = false\ndt = 0.125")
        cfg = self.write_cfg(tmp_path, text)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_SOLVER

    def test_figure_and_config_exclusive(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        assert main(["run", "--config", str(cfg), "--figure", "3"]) == EXIT_CONFIG

    def test_mode_override(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out), "--mode", "dense"])
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["mode"] == "dense"
        assert report["config"]["solver"] == "dense_lu"


class TestConvergenceCommand:
    def test_self_reference_path(self, tmp_path):
        ((_, cfg),) = parse_config(SMALL_RUN)
        rows = convergence_table(cfg, [8, 16], None, None)
        assert [row["J"] for row in rows] == [8, 16]
        assert all(row["sup_error"] > 0 for row in rows)
        assert "sup_ratio" in rows[1]

    def test_identical_resolutions_identical_errors(self, tmp_path):
        ((_, cfg),) = parse_config(SMALL_RUN)
        rows = convergence_table(cfg, [12, 12], None, None)
        assert rows[0]["sup_error"] == rows[1]["sup_error"]
        assert rows[0]["l1_error"] == rows[1]["l1_error"]

    def test_cli_and_csv(self, tmp_path, capsys):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(SMALL_RUN)
        out = tmp_path / "conv"
        code = main(["convergence", "--config", str(cfg), "--j-list", "8,16",
                     "--out", str(out)])
        assert code == EXIT_OK
        assert "strictly decreasing" in capsys.readouterr().out
        lines = (out / "convergence.csv").read_text().strip().splitlines()
        assert lines[0] == "J,h,sup_error,l1_error"
        assert len(lines) == 3

    def test_rejects_sweeps(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(SMALL_RUN + "b = 1, 2\n")
        assert main(["convergence", "--config", str(cfg)]) == EXIT_CONFIG


class TestBenchCommand:
    def test_single_row_no_ratio(self):
        ((_, cfg),) = parse_config(SMALL_RUN)
        rows = bench_table(cfg, [16], ["fast"], applies=5)
        assert len(rows) == 1
        assert "apply_ratio" not in rows[0]
        assert rows[0]["apply_seconds"] > 0.0

    def test_modes_and_ratios(self):
        ((_, cfg),) = parse_config(SMALL_RUN)
        rows = bench_table(cfg, [16, 32], ["fast", "dense"], applies=5)
        assert len(rows) == 4
        with_ratio = [r for r in rows if "apply_ratio" in r]
        assert len(with_ratio) == 2

    def test_cli_defaults_to_timing_scenario(self, tmp_path, capsys):
        code = main(["bench", "--j-list", "8,16", "--applies", "3",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "bench.csv").exists()
        assert "apply_s" in capsys.readouterr().out

    def test_descending_j_rejected(self):
        assert main(["bench", "--j-list", "16,8"]) == EXIT_CONFIG


class TestCheckCommand:
    def test_reports_margin(self, tmp_path, capsys):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(SMALL_RUN + "drift = linear:-0.6\n")
        assert main(["check", "--config", str(cfg)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "satisfied" in out and "margin" in out

    def test_violated_margin_flagged(self, tmp_path, capsys):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(SMALL_RUN + "drift = linear:-1\n")
        main(["check", "--config", str(cfg)])
        assert "NOT satisfied" in capsys.readouterr().out
