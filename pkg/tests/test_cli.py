#
# Copyright (c) nexB Inc. and others. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
# See http://www.apache.org/licenses/LICENSE-2.0 for the license text.
# See https://github.com/nexB/resid-edf for support or download.
# See https://aboutcode.org for more information about nexB OSS projects.
#

import json
import os

import numpy as np
import pandas as pd
from click.testing import CliRunner
from commoncode.testcase import FileBasedTesting

from resid_edf.cli import EXIT_ERROR
from resid_edf.cli import EXIT_REJECT
from resid_edf.cli import EXIT_RETAIN
from resid_edf.cli import cli
from resid_edf.cli import fit_grid


def run_cli(args, env=None, expected_rc=0):
    """
    Run the resid-edf command line with `args` and return the click Result.
    Fail with the output if the exit code is not `expected_rc`.
    """
    result = CliRunner().invoke(cli, args, env=env, catch_exceptions=False)
    assert result.exit_code == expected_rc, result.output
    return result


def read_lines(location):
    with open(location) as output:
        return output.read().splitlines()


def test_fit_grid_covers_the_box():
    points = fit_grid(((-1.0, 1.0), (0.0, 2.0)), 3)
    assert points.shape == (9, 2)
    assert points[0].tolist() == [-1.0, 0.0]
    assert points[1].tolist() == [-1.0, 1.0]
    assert points[-1].tolist() == [1.0, 2.0]


class TestCli(FileBasedTesting):
    test_data_dir = os.path.join(os.path.dirname(__file__), "testfiles/cli")

    def test_fit_recovers_a_line(self):
        data = self.get_test_loc("linear.csv")
        out = self.get_temp_file("csv")
        run_cli(["fit", "--data", data, "--grid", "11", "--out", out])
        lines = read_lines(out)
        assert lines[0].startswith("# resid-edf ")
        assert "command=fit" in lines[0]
        frame = pd.read_csv(out, comment="#")
        assert list(frame.columns) == ["x", "rhat"]
        assert len(frame) == 11
        assert np.allclose(frame["rhat"], 1.0 + 2.0 * frame["x"], atol=1e-5)

    def test_edf_complete_case_and_tuned(self):
        data = self.get_test_loc("wiggle.csv")
        for extra in ([], ["--tuned"], ["--tuned", "--imputation", "partial"]):
            out = self.get_temp_file("csv")
            run_cli(["edf", "--data", data, "--out", out] + extra)
            lines = read_lines(out)
            assert "command=edf" in lines[0]
            assert lines[1] == "t,F"
            frame = pd.read_csv(out, comment="#")
            assert (np.diff(frame["t"]) >= 0).all()
            assert (np.diff(frame["F"]) > 0).all()
            assert frame["F"].iloc[-1] == 1.0

    def test_normtest_prints_a_summary(self):
        data = self.get_test_loc("wiggle.csv")
        runner = CliRunner()
        result = runner.invoke(cli, ["normtest", "--data", data])
        assert result.exit_code in (EXIT_RETAIN, EXIT_REJECT), result.output
        summary = json.loads(result.stdout)
        assert set(summary) >= {"statistic", "critical_value", "alpha", "reject", "N", "truncated_points"}
        assert summary["N"] == 40
        assert result.exit_code == (EXIT_REJECT if summary["reject"] else EXIT_RETAIN)

    def test_normtest_tuned_uses_the_same_rows(self):
        data = self.get_test_loc("wiggle.csv")
        result = CliRunner().invoke(cli, ["normtest", "--data", data, "--tuned", "--alpha", "0.1"])
        assert result.exit_code in (EXIT_RETAIN, EXIT_REJECT), result.output
        assert json.loads(result.stdout)["alpha"] == 0.1

    def test_normtest_exits_with_2_on_bad_data(self):
        data = os.path.join(os.path.dirname(__file__), "testfiles/data/bad-delta.csv")
        result = CliRunner().invoke(cli, ["normtest", "--data", data])
        assert result.exit_code == EXIT_ERROR

    def test_normtest_exits_with_2_on_a_single_row(self):
        data = self.get_test_loc("one-row.csv")
        for extra in ([], ["--tuned"]):
            result = CliRunner().invoke(cli, ["normtest", "--data", data] + extra)
            assert result.exit_code == EXIT_ERROR, result.output
            assert "Error:" in result.output

    def test_normtest_exits_with_2_on_invalid_alpha(self):
        data = self.get_test_loc("wiggle.csv")
        result = CliRunner().invoke(cli, ["normtest", "--data", data, "--alpha", "1.5"])
        assert result.exit_code == EXIT_ERROR

    def test_mse_is_identical_across_jobs(self):
        first = self.get_temp_file("csv")
        second = self.get_temp_file("csv")
        args = ["mse", "--n", "40", "--t", "-1,0,1", "--runs", "4", "--seed", "6"]
        run_cli(args + ["--jobs", "1", "--out", first])
        run_cli(args + ["--jobs", "2", "--out", second])
        assert read_lines(first) == read_lines(second)
        lines = read_lines(first)
        assert "table=mse seed=6" in lines[0]
        assert lines[1] == "row,t,cc,cc_se,tuned,tuned_se,runs,failures"
        assert len(lines) == 2 + 3 + 3

    def test_power_is_identical_across_jobs(self):
        first = self.get_temp_file("csv")
        second = self.get_temp_file("csv")
        args = ["power", "--laws", "n02,laplace", "--n", "40", "--runs", "4", "--seed", "6"]
        run_cli(args + ["--jobs", "1", "--out", first])
        run_cli(args + ["--jobs", "2", "--out", second])
        assert read_lines(first) == read_lines(second)
        assert read_lines(first)[1] == "law,n,cc,cc_se,tuned,tuned_se,runs,failures"

    def test_seed_is_read_from_the_environment(self):
        from_env = self.get_temp_file("csv")
        from_flag = self.get_temp_file("csv")
        args = ["expansion", "--n", "40", "--runs", "3"]
        run_cli(args + ["--out", from_env], env={"RESID_EDF_SEED": "12"})
        run_cli(args + ["--seed", "12", "--out", from_flag], env={"RESID_EDF_SEED": "99"})
        assert read_lines(from_env) == read_lines(from_flag)
        assert "seed=12" in read_lines(from_env)[0]

    def test_invalid_runs_fail(self):
        out = self.get_temp_file("csv")
        result = CliRunner().invoke(cli, ["mse", "--runs", "0", "--out", out])
        assert result.exit_code != 0
        assert "runs must be >= 1" in result.output

    def test_unknown_law_fails(self):
        out = self.get_temp_file("csv")
        result = CliRunner().invoke(cli, ["power", "--laws", "cauchy", "--runs", "2", "--out", out])
        assert result.exit_code != 0
