import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from smchmc.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, build_parser, main
from smchmc.experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentTable,
    run_accuracy,
    run_adjusted,
    run_bias,
    run_contraction,
    run_experiment,
    run_mjp,
    run_sample,
    run_tune,
)


def data_rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(lines))))


class TestConfig:
    def test_grid_sorted_descending(self):
        cfg = ExperimentConfig("accuracy", h_grid=(0.1, 0.5, 0.25))
        assert cfg.h_grid == (0.5, 0.25, 0.1)
        assert ExperimentConfig("accuracy", n_range=(2, 4)).grid((0, 0)) == (0.25, 0.125, 0.0625)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(subcommand="plot"),
            dict(subcommand="accuracy", trials=0),
            dict(subcommand="accuracy", h_grid=()),
            dict(subcommand="accuracy", h_grid=(0.1, -0.1)),
            dict(subcommand="accuracy", h_grid=(0.1, 0.1)),
            dict(subcommand="accuracy", n_range=(4, 2)),
            dict(subcommand="accuracy", h_grid=(0.1,), n_range=(1, 2)),
            dict(subcommand="bias", relax=0.0),
            dict(subcommand="adjusted", rho="beta"),
            dict(subcommand="adjusted", steps=0),
        ],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs)

    def test_quick_divides_counts(self):
        assert ExperimentConfig("accuracy", quick=True).count(None, 10_000) == 1_000
        assert ExperimentConfig("accuracy", quick=True).count(5, 10_000) == 1

    def test_bad_model_is_config_error(self):
        with pytest.raises(ConfigError):
            run_accuracy(ExperimentConfig("accuracy", model="banana"))

    @pytest.mark.parametrize("runner,sub", [(run_contraction, "contraction"), (run_bias, "bias"), (run_mjp, "mjp")])
    def test_gaussian_only(self, runner, sub):
        with pytest.raises(ConfigError):
            runner(ExperimentConfig(sub, model="dw"))

    def test_adjusted_needs_convex(self):
        with pytest.raises(ConfigError):
            run_adjusted(ExperimentConfig("adjusted", model="dw"))

    def test_mjp_step_condition(self):
        with pytest.raises(ConfigError):
            run_mjp(ExperimentConfig("mjp", lam=1.0, h=1.5))

    def test_tune_requires_ordered_constants(self):
        with pytest.raises(ConfigError):
            run_tune(ExperimentConfig("tune", K=2.0, L=1.0, d=1))
        with pytest.raises(ConfigError):
            run_tune(ExperimentConfig("tune", model="dw"))


class TestTable:
    def test_row_arity(self):
        t = ExperimentTable("x", "claim", ["a", "b"])
        with pytest.raises(ValueError):
            t.add_row(1)

    def test_csv_layout_and_atomic_write(self, tmp_path):
        t = ExperimentTable("x", "claim", ["a", "b"], metadata={"seed": 3})
        t.add_row(1, 0.1)
        t.summary["slope"] = 1.5
        t.check("ok", True, "fine")
        t.check("info", False, "not enforced", enforced=False)
        path = tmp_path / "sub" / "out.csv"
        t.write(str(path))
        text = path.read_text()
        assert text.splitlines()[:4] == ["# experiment=x", "# seed=3", "a,b", "1,0.1"]
        assert "# summary slope=1.5" in text and "# check info=INFO not enforced" in text
        assert t.passed
        assert [p.name for p in path.parent.iterdir()] == ["out.csv"]


class TestRunners:
    def test_accuracy_small(self):
        t = run_accuracy(ExperimentConfig("accuracy", trials=200, n_range=(2, 6)))
        assert t.header == ["h", "l2_error_smc", "l2_error_verlet", "trials"]
        assert len(t.rows) == 5 and list(t.column("h")) == sorted(t.column("h"), reverse=True)
        assert 1.2 < t.summary["slope_smc"] < 1.8

    def test_accuracy_rough_well_reports_verlet_only(self):
        t = run_accuracy(ExperimentConfig("accuracy", model="rough:1", trials=100, n_range=(2, 5)))
        assert [c.enforced for c in t.checks if c.name == "verlet_order"] == [False]

    def test_contraction_identical_starts(self):
        t = run_contraction(ExperimentConfig("contraction", trials=100, chain_trials=20, steps=5, x0=(0.5,), y0=(0.5,)))
        assert np.all(t.column("distance") == 0) and t.passed

    def test_contraction_overridden_duration_not_asserted(self):
        t = run_contraction(ExperimentConfig("contraction", trials=100, chain_trials=20, steps=10, T=1.0))
        assert "warning" in t.summary and all(not c.enforced for c in t.checks)

    def test_bias_small(self):
        t = run_bias(ExperimentConfig("bias", trials=500, n_range=(2, 4), steps=20))
        assert len(t.rows) == 3 and "w2_hat_adjusted" in t.header
        assert np.all(t.column("N") == 500)

    def test_mjp_small(self):
        t = run_mjp(ExperimentConfig("mjp", trials=200, events=2000, chain_trials=3, t_end=20.0, T=5.0))
        assert len(t.rows) == 4 and np.all(t.column("lam_h") <= 1.0)
        assert t.summary["lam"] == 12.0

    def test_adjusted_small(self):
        t = run_adjusted(ExperimentConfig("adjusted", trials=20, steps=50))
        assert len(t.rows) == 1000
        assert [c.passed for c in t.checks if c.name == "verlet_bitmatch"] == [True]

    def test_sample(self):
        t = run_sample(ExperimentConfig("sample", trials=2, steps=3, model="iso:1,2"))
        assert t.header == ["step", "trial", "x1", "x2"] and len(t.rows) == 8

    def test_tune_worked_example(self):
        t = run_tune(ExperimentConfig("tune", K=1.0, L=1.0, d=1, eps=0.1, w2_init=1.0))
        row = dict(zip(t.header, t.rows[0]))
        assert row["m"] == 144 and row["c"] == pytest.approx(1 / 48)
        assert row["grad_evals"] == row["m"] * round(row["T"] / row["h"])
        assert row["jump_lam"] == 12.0 and row["jump_gamma"] == pytest.approx(1 / 120)

    def test_tune_monotone_in_eps(self):
        a = dict(zip(*(lambda t: (t.header, t.rows[0]))(run_tune(ExperimentConfig("tune", eps=0.1)))))
        b = dict(zip(*(lambda t: (t.header, t.rows[0]))(run_tune(ExperimentConfig("tune", eps=0.2)))))
        assert b["m"] < a["m"] and b["h"] > a["h"]


class TestReproducibility:
    @pytest.mark.parametrize(
        "cfg",
        [
            dict(subcommand="accuracy", trials=50, n_range=(2, 5)),
            dict(subcommand="contraction", trials=50, chain_trials=10, steps=5),
            dict(subcommand="mjp", trials=50, events=500, chain_trials=2, t_end=5.0, T=2.0),
            dict(subcommand="adjusted", trials=5, steps=20),
        ],
    )
    def test_byte_identical_reruns(self, tmp_path, cfg):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(ExperimentConfig(seed=123, out=str(a), **cfg))
        run_experiment(ExperimentConfig(seed=123, out=str(b), **cfg))
        assert a.read_bytes() == b.read_bytes()
        c = tmp_path / "c.csv"
        run_experiment(ExperimentConfig(seed=124, out=str(c), **cfg))
        assert data_rows(a.read_text()) != data_rows(c.read_text())


class TestCli:
    def test_parser(self):
        args = build_parser().parse_args(["accuracy", "--n-range", "2..5", "--seed", "0x10", "--quick"])
        assert args.n_range == (2, 5) and args.seed == 16 and args.quick
        args = build_parser().parse_args(["bias", "--h-grid", "0.1,0.05", "--relax", "10"])
        assert args.h_grid == (0.1, 0.05) and args.relax == 10.0

    def test_pass_exit_and_output(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        code = main(["tune", "--out", str(out)])
        assert code == EXIT_PASS
        printed = capsys.readouterr().out
        assert "PASS tune" in printed and "m: 144" in printed
        assert data_rows(out.read_text())[0][0] == "T"

    def test_fail_exit(self, capsys):
        # steps beyond the oscillator's stability limit are far from the asymptotic regime
        code = main(["accuracy", "--trials", "20", "--T", "8", "--h-grid", "4,2,1"])
        assert code == EXIT_FAIL
        assert "FAIL accuracy" in capsys.readouterr().out

    def test_config_error_exit(self, capsys):
        assert main(["mjp", "--lam", "1", "--h", "2"]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_argparse_error_exit(self):
        with pytest.raises(SystemExit) as exc:
            main(["accuracy", "--h-grid", "a,b"])
        assert exc.value.code == EXIT_CONFIG

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "smchmc", "tune", "--K", "1", "--L", "4", "--d", "2"], capture_output=True, text=True)
        assert proc.returncode == 0 and "jump_lam: 24.0" in proc.stdout
