"""Tests for experiment sweeps and result export."""

import pandas as pd
import pytest

from config import config_snapshot
from simulation.engine import run
from simulation.export import SERIES_COLUMNS, SUMMARY_COLUMNS, export, preflight
from simulation.sweep import Cell, ExperimentMatrix, cell_config, select_workers, sweep
from utils.errors import ContractViolation, OutputError, SimulationError


def small_matrix(**kwargs):
    params = {"workloads": ("io",), "splits": ("0", "100"), "base_seed": 42}
    params.update(kwargs)
    return ExperimentMatrix(**params)


class TestMatrix:
    def test_default_matrix_has_24_cells(self, default_config):
        matrix = ExperimentMatrix.from_config(default_config)
        cells = matrix.cells()
        assert len(cells) == 24
        assert len({cell.label for cell in cells}) == 24
        assert cells[0] == Cell("matmult", "0", 0, 42)

    def test_splits_normalized(self):
        assert small_matrix(splits=("25.0", "AUTO")).splits == ("25", "auto")

    def test_repetition_seeds(self):
        matrix = small_matrix(repetitions=3)
        seeds = [matrix.seed_for(rep) for rep in range(3)]
        assert seeds[0] == 42
        assert len(set(seeds)) == 3
        assert seeds == [small_matrix(repetitions=3).seed_for(rep) for rep in range(3)]
        by_rep = {}
        for cell in matrix.cells():
            by_rep.setdefault(cell.repetition, set()).add(cell.seed)
        assert all(len(group) == 1 for group in by_rep.values())

    @pytest.mark.parametrize("kwargs", [
        {"workloads": ()},
        {"splits": ()},
        {"repetitions": 0},
        {"workloads": ("video",)},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises((ContractViolation, ValueError)):
            small_matrix(**kwargs)


def test_cell_config(short_config):
    fixed = cell_config(short_config, Cell("image", "25", 0, 7))
    assert (fixed.workload.name, fixed.gateway.mode, fixed.gateway.fixed_pct, fixed.run.seed) == ("image", "fixed", 25.0, 7)
    auto = cell_config(short_config, Cell("io", "auto", 0, 7))
    assert auto.gateway.mode == "auto"


def test_two_cells_two_results(short_config):
    outcome = sweep(short_config, small_matrix())
    assert outcome.ok
    assert [(r.workload, r.split) for r in outcome.results] == [("io", "0"), ("io", "100")]
    assert all(r.generated == r.successful + r.failed for r in outcome.results)


def test_all_splits_see_the_same_arrivals(short_config):
    outcome = sweep(short_config, small_matrix(splits=("0", "50", "100")))
    assert len({r.generated for r in outcome.results}) == 1


def test_failed_cell_does_not_stop_sweep(monkeypatch, short_config):
    def flaky(config):
        if config.gateway.fixed_pct == 100.0:
            raise SimulationError("boom")
        return run(config)

    monkeypatch.setattr("simulation.sweep.run", flaky)
    outcome = sweep(short_config, small_matrix())
    assert not outcome.ok
    assert [r.split for r in outcome.results] == ["0"]
    assert outcome.errors[0].split == "100"
    assert "boom" in outcome.errors[0].error


def test_parallel_matches_serial(short_config):
    matrix = small_matrix(workloads=("io", "mixed"))
    serial = sweep(short_config, matrix, workers=1)
    parallel = sweep(short_config, matrix, workers=2)
    assert [r.summary() for r in serial.results] == [r.summary() for r in parallel.results]


def test_select_workers():
    cells = small_matrix().cells()
    assert select_workers(None, 8, cells) == 2
    assert select_workers(0, 8, cells) == 1
    assert select_workers(1, 8, cells) == 1


class TestExport:
    def test_empty_sweep_header_only(self, tmp_path):
        export([], tmp_path)
        assert (tmp_path / "summary.csv").read_text() == ",".join(SUMMARY_COLUMNS) + "\n"

    def test_one_run_one_row(self, tmp_path, short_config):
        result = run(short_config)
        export([result], tmp_path, config=config_snapshot(short_config))
        frame = pd.read_csv(tmp_path / "summary.csv", dtype={"split": str})
        assert list(frame.columns) == SUMMARY_COLUMNS
        assert len(frame) == 1
        row = frame.iloc[0]
        assert (row["workload"], row["split"]) == (result.workload, result.split)
        assert (row["successful"], row["failed"]) == (result.successful, result.failed)
        assert row["mean_latency_s"] == pytest.approx(result.mean_latency_s, abs=1e-6)

        series = pd.read_csv(tmp_path / "runs" / "mixed_auto_0.csv")
        assert list(series.columns) == SERIES_COLUMNS
        assert len(series) == len(result.series)
        assert (tmp_path / "runs" / "mixed_auto_0.json").is_file()
        assert (tmp_path / "summary.json").is_file()

    def test_repetitions_have_distinct_rows(self, tmp_path, short_config):
        matrix = small_matrix(splits=("50",), repetitions=2)
        outcome = sweep(short_config, matrix, workers=1)
        export(outcome.results, tmp_path, formats=("csv",))
        frame = pd.read_csv(tmp_path / "summary.csv", dtype={"split": str})
        assert len(frame) == 2
        keys = list(zip(frame["workload"], frame["split"], frame["repetition"]))
        assert keys == [("io", "50", 0), ("io", "50", 1)]
        assert list(frame["seed"]) == [matrix.seed_for(0), matrix.seed_for(1)]

    def test_reexport_identical_bytes(self, tmp_path, short_config):
        result = run(short_config)
        first = export([result], tmp_path / "a")
        second = export([result], tmp_path / "b")
        assert [p.relative_to(tmp_path / "a") for p in first] == [p.relative_to(tmp_path / "b") for p in second]
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()

    def test_csv_only(self, tmp_path):
        written = export([], tmp_path, formats=("csv",))
        assert [p.name for p in written] == ["summary.csv"]

    def test_unknown_format(self, tmp_path):
        with pytest.raises(OutputError):
            export([], tmp_path, formats=("xml",))

    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("not a directory")
        with pytest.raises(OutputError):
            preflight(blocker)
