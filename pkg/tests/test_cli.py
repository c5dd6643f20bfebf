"""Tests for the experiment command line."""

import pandas as pd
import pytest

from run_experiments import EXIT_BAD_INPUT, EXIT_CELL_FAILED, EXIT_OK, build_parser, collect_overrides, main
from tests.conftest import DEFAULT_CONF, SHORT_RUN
from utils.errors import ConfigError, SimulationError

SHORT_FLAGS = [flag for key, value in SHORT_RUN.items() for flag in ("--set", f"{key}={value}")]


def cli(command, out, *extra):
    return main([command, "--config", str(DEFAULT_CONF), "--out", str(out), *SHORT_FLAGS, *extra])


def test_run_writes_results(tmp_path):
    assert cli("run", tmp_path, "--split", "100", "--workload", "io", "--seed", "7") == EXIT_OK
    assert (tmp_path / "runs" / "io_100_0.csv").is_file()
    frame = pd.read_csv(tmp_path / "summary.csv", dtype={"split": str})
    assert frame.loc[0, "split"] == "100"


def test_sweep_writes_every_cell(tmp_path):
    code = cli("sweep", tmp_path, "--set", "sweep.workloads=io", "--set", "sweep.splits=0, auto", "--workers", "1")
    assert code == EXIT_OK
    frame = pd.read_csv(tmp_path / "summary.csv", dtype={"split": str})
    assert list(frame["split"]) == ["0", "auto"]


def test_failed_cell_sets_exit_code(monkeypatch, tmp_path):
    def broken(config):
        raise SimulationError("boom")

    monkeypatch.setattr("simulation.sweep.run", broken)
    assert cli("sweep", tmp_path, "--set", "sweep.workloads=io", "--set", "sweep.splits=0") == EXIT_CELL_FAILED


@pytest.mark.parametrize("extra", [
    ("--split", "half"),
    ("--set", "offload.c_sof=2"),
    ("--set", "offload.c_soft=9"),
    ("--set", "no-equals-sign"),
])
def test_bad_input(tmp_path, extra):
    assert cli("run", tmp_path, *extra) == EXIT_BAD_INPUT


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli("run", blocker) == EXIT_BAD_INPUT


def test_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.conf"), "--out", str(tmp_path)]) == EXIT_BAD_INPUT


def test_collect_overrides():
    args = build_parser().parse_args(["run", "--split", "25.0", "--seed", "3", "--set", "gateway.mode=auto"])
    overrides = collect_overrides(args)
    assert overrides["gateway.mode"] == "fixed"
    assert overrides["gateway.fixed_pct"] == "25"
    assert overrides["run.seed"] == "3"
    with pytest.raises(ConfigError):
        collect_overrides(build_parser().parse_args(["run", "--split", "200"]))
