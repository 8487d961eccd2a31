import json
import random
import subprocess
import sys

import numpy as np
import pytest

from bpassoc import bench, cli
from bpassoc.errors import ConfigError, ParseError


def small_config(**kw):
    base = dict(trials=6, algorithms=["bp", "cd:3", "oracle"])
    base.update(kw)
    return bench.SweepConfig(**base)


class TestConfig:
    @pytest.mark.parametrize(
        "text, name, depth",
        [("bp", "bp", 0), ("oracle", "oracle", 0), ("cd:5", "cd", 5), (" cd:3 ", "cd", 3)],
    )
    def test_algorithm_parse(self, text, name, depth):
        alg = bench.Algorithm.parse(text)
        assert (alg.name, alg.depth) == (name, depth)

    @pytest.mark.parametrize("text", ["", "jpda", "cd:", "cd:x", "cd:0"])
    def test_bad_algorithm(self, text):
        with pytest.raises(ConfigError):
            bench.Algorithm.parse(text)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(trials=0),
            dict(algorithms=[]),
            dict(rows=0),
            dict(spacings=[-1.0]),
            dict(p_d=[1.0]),
            dict(lambda_fa=[0.0]),
            dict(r_meas=[]),
            dict(bp_delta=0.0),
            dict(bp_check_interval=0),
            dict(gate_exclusion=1.0),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            small_config(**kw).validate()

    def test_combos_are_cartesian(self):
        cfg = small_config(spacings=[0.0, 3.0], p_d=[0.3, 0.9], r_meas=[0.1, 1.0, 10.0])
        assert len(cfg.combos()) == 12


class TestSweep:
    def test_tree_case_is_exact(self, tmp_path):
        cfg = bench.SweepConfig(rows=1, cols=1, trials=1, algorithms=["bp", "oracle"])
        summary, records = bench.run_sweep(cfg, tmp_path / "r.csv")
        bp_row = next(r for r in summary if r["algorithm"] == "bp")
        assert bp_row["mean_err"] <= 1e-9
        assert all(r.ok for r in records)

    def test_records(self, tmp_path):
        cfg = small_config(spacings=[0.0, 3.0])
        summary, records = bench.run_sweep(cfg, tmp_path / "r.csv", per_trial=True)
        assert len(records) == 2 * 6 * 3
        assert len(summary) == 2 * 3
        for r in records:
            assert 0.0 <= r.error <= 1.0
            assert r.time_us >= 0.0
            assert (r.iterations is not None) == (r.algorithm == "bp")
        assert all(r["mean_err"] == 0.0 for r in summary if r["algorithm"] == "oracle")
        assert (tmp_path / "r.trials.csv").exists()

    def test_same_seed_identical_files(self, tmp_path):
        cfg = small_config(timing=False)
        bench.run_sweep(cfg, tmp_path / "a.csv", per_trial=True)
        bench.run_sweep(cfg, tmp_path / "b.csv", per_trial=True)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.trials.csv").read_bytes() == (tmp_path / "b.trials.csv").read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = small_config(timing=False, trials=4)
        bench.run_sweep(cfg, tmp_path / "s.csv", parallel=1)
        bench.run_sweep(cfg, tmp_path / "p.csv", parallel=2)
        assert (tmp_path / "s.csv").read_bytes() == (tmp_path / "p.csv").read_bytes()

    def test_aggregation_order_independent(self):
        records = bench.collect_trials(small_config(trials=8), parallel=1)
        shuffled = records.copy()
        random.Random(0).shuffle(shuffled)
        assert bench.aggregate(shuffled) == bench.aggregate(records)

    def test_failed_trials_recorded(self, tmp_path):
        cfg = small_config(oracle_budget=2, trials=3)
        summary, records = bench.run_sweep(cfg, tmp_path / "r.csv")
        assert all(r.status.startswith("reference-failed") for r in records)
        assert all(r["failures"] == 3 and r["trials"] == 0 for r in summary)

    def test_file_header(self, tmp_path):
        cfg = small_config(trials=2)
        bench.run_sweep(cfg, tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == f"# format: {bench.RESULTS_FORMAT}"
        assert json.loads(lines[1].split(":", 1)[1]) == json.loads(json.dumps(cfg.__dict__))
        assert lines[2].split(",") == bench.RESULT_COLUMNS


class TestSummarize:
    def test_results_file_round_trip(self, tmp_path):
        summary, _ = bench.run_sweep(small_config(), tmp_path / "r.csv")
        back = bench.summarize(tmp_path / "r.csv")
        assert len(back) == len(summary)
        for a, b in zip(back, summary):
            for k in bench.RESULT_COLUMNS:
                if isinstance(b[k], float):
                    assert a[k] == pytest.approx(b[k], rel=1e-15, nan_ok=True)
                else:
                    assert a[k] == b[k]

    def test_trials_file_reaggregates(self, tmp_path):
        summary, _ = bench.run_sweep(small_config(timing=False), tmp_path / "r.csv", per_trial=True)
        again = bench.summarize(tmp_path / "r.trials.csv")
        assert [r["mean_err"] for r in again] == [r["mean_err"] for r in summary]

    def test_single_row(self, tmp_path):
        bench.run_sweep(small_config(algorithms=["bp"]), tmp_path / "r.csv")
        rows = bench.summarize(tmp_path / "r.csv")
        assert len(rows) == 1
        _, raw = bench.read_results(tmp_path / "r.csv")
        assert rows == raw

    def test_wstar_columns_present(self, tmp_path):
        bench.run_sweep(small_config(algorithms=["bp"]), tmp_path / "r.csv")
        (row,) = bench.summarize(tmp_path / "r.csv")
        assert row["p5_wstar"] <= row["mean_wstar"] <= row["p95_wstar"]
        assert row["max_iters"] >= row["mean_iters"] > 0

    def test_percentiles_bracket_mean(self, tmp_path):
        bench.run_sweep(small_config(trials=40, spacings=[0.0, 3.0, 6.0]), tmp_path / "r.csv")
        for row in bench.summarize(tmp_path / "r.csv"):
            assert row["p5_err"] <= row["mean_err"] <= row["p95_err"]

    def test_parse_errors(self, tmp_path):
        bench.run_sweep(small_config(trials=2), tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        bad = tmp_path / "bad.csv"

        bad.write_text("\n".join(lines[:4] + ["1,2,3"]) + "\n")
        with pytest.raises(ParseError) as info:
            bench.summarize(bad)
        assert info.value.line == 5

        fields = lines[3].split(",")
        fields[10] = "abc"
        bad.write_text("\n".join(lines[:3] + [",".join(fields)]) + "\n")
        with pytest.raises(ParseError) as info:
            bench.summarize(bad)
        assert info.value.line == 4

        bad.write_text("\n".join(lines[1:]) + "\n")
        with pytest.raises(ParseError) as info:
            bench.summarize(bad)
        assert info.value.line == 2

        bad.write_text("# format: bpassoc-results/1\n")
        with pytest.raises(ParseError):
            bench.summarize(bad)


class TestCli:
    def test_sweep_and_summarize(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code = cli.main(["--trials", "3", "--spacing", "0,3", "--algs", "bp,oracle", "--out", str(out), "--per-trial"])
        assert code == 0
        assert len(bench.summarize(out)) == 4
        capsys.readouterr()
        assert cli.main(["summarize", str(out)]) == 0
        assert "mean_err" in capsys.readouterr().out

    def test_explicit_sweep_subcommand(self, tmp_path):
        assert cli.main(["sweep", "--trials", "1", "--out", str(tmp_path / "r.csv"), "--quiet"]) == 0

    @pytest.mark.parametrize(
        "args",
        [["--trials", "0"], ["--algs", "magic"], ["--pd", "abc"], ["--unknown"], ["--parallel", "0"], ["--pd", "1.0"]],
    )
    def test_config_errors_exit_one(self, tmp_path, args):
        assert cli.main(args + ["--out", str(tmp_path / "r.csv"), "--quiet"]) == 1

    def test_trial_failure_exit_two(self, tmp_path):
        args = ["--trials", "2", "--oracle-budget", "1", "--out", str(tmp_path / "r.csv"), "--quiet"]
        assert cli.main(args) == 2

    def test_solve(self, tmp_path, capsys):
        f = tmp_path / "w.txt"
        f.write_text("2 2\n1 1\n1 1\n")
        assert cli.main(["solve", str(f), "--delta", "1e-9"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "side,index,assoc,probability"
        assert len(lines) == 1 + 2 * 3 + 2 * 3
        row = next(ln for ln in lines if ln.startswith("target,1,1,"))
        assert float(row.split(",")[3]) == pytest.approx(0.276393, abs=1e-6)
        assert cli.main(["solve", str(f), "--alg", "oracle"]) == 0
        row = next(ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("target,1,1,"))
        assert float(row.split(",")[3]) == pytest.approx(2 / 7, abs=1e-12)
        assert cli.main(["solve", str(f), "--alg", "cd:4"]) == 0

    def test_solve_bad_file(self, tmp_path, capsys):
        f = tmp_path / "w.txt"
        f.write_text("2 2\n1 1\n")
        assert cli.main(["solve", str(f)]) == 1
        assert "line 3" in capsys.readouterr().err
        assert cli.main(["solve", str(tmp_path / "missing.txt")]) == 1

    def test_module_entry_point(self, tmp_path):
        f = tmp_path / "w.txt"
        f.write_text("1 1\n2\n")
        res = subprocess.run([sys.executable, "-m", "bpassoc", "solve", str(f)], capture_output=True, text=True)
        assert res.returncode == 0
        probs = [float(ln.split(",")[3]) for ln in res.stdout.splitlines()[1:3]]
        np.testing.assert_allclose(probs, [1 / 3, 2 / 3])
