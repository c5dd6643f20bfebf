"""
Result export.

Output layout under the chosen directory:
    summary.csv / summary.json          one row per cell and repetition
    runs/<workload>_<split>_<rep>.csv   time series (t_s, metric, value)
    runs/<workload>_<split>_<rep>.json  the same series plus the run summary
Serialization is a pure function of the results, so re-exporting the same
results produces identical bytes.
"""

import json
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd

from simulation.engine import RunResult
from simulation.sweep import CellError
from utils.errors import OutputError
from utils.logger import get_logger

logger = get_logger(__name__)

SUMMARY_COLUMNS = [
    "workload", "split", "successful", "failed", "mean_latency_s", "p95_latency_s", "repetition", "seed",
]
SERIES_COLUMNS = ["t_s", "metric", "value"]
FLOAT_FORMAT = "%.6f"


def preflight(out_dir: Union[str, Path]) -> Path:
    """
    Make sure results can be written before any run starts.

    Args:
        out_dir: Output directory (created if missing)

    Returns:
        The directory as a Path

    Raises:
        OutputError: If the directory cannot be created or written
    """
    path = Path(out_dir)
    probe = path / ".write-test"
    try:
        (path / "runs").mkdir(parents=True, exist_ok=True)
        probe.write_text("ok", encoding="utf-8")
        probe.unlink()
    except OSError as e:
        raise OutputError(f"Output directory {path} is not writable: {e}")
    return path


def summary_frame(results: Iterable[RunResult]) -> pd.DataFrame:
    rows = [{column: result.summary()[column] for column in SUMMARY_COLUMNS} for result in results]
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def series_frame(result: RunResult) -> pd.DataFrame:
    return pd.DataFrame(result.series, columns=SERIES_COLUMNS)


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _write_json(payload: Any, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_filename(result: RunResult) -> str:
    return f"{result.workload}_{result.split}_{result.repetition}"


def export(
    results: Sequence[RunResult],
    out_dir: Union[str, Path],
    formats: Sequence[str] = ("csv", "json"),
    config: Optional[Dict[str, Any]] = None,
    errors: Sequence[CellError] = ()
) -> List[Path]:
    """
    Write the summary and per-run series.

    Args:
        results: Completed runs in output order
        out_dir: Output directory
        formats: Any of "csv" and "json"
        config: Config snapshot embedded in summary.json
        errors: Failed cells, listed in summary.json

    Returns:
        Paths of the written files
    """
    unknown = set(formats) - {"csv", "json"}
    if unknown:
        raise OutputError(f"Unknown export formats {sorted(unknown)}")
    root = preflight(out_dir)
    runs_dir = root / "runs"
    written: List[Path] = []

    if "csv" in formats:
        _write_csv(summary_frame(results), root / "summary.csv")
        written.append(root / "summary.csv")
    if "json" in formats:
        payload = {
            "config": config if config is not None else (results[0].config if results else {}),
            "rows": [result.summary() for result in results],
            "errors": [asdict(error) for error in errors],
        }
        _write_json(payload, root / "summary.json")
        written.append(root / "summary.json")

    for result in results:
        name = run_filename(result)
        if "csv" in formats:
            _write_csv(series_frame(result), runs_dir / f"{name}.csv")
            written.append(runs_dir / f"{name}.csv")
        if "json" in formats:
            _write_json(
                {
                    "summary": result.summary(),
                    "config": result.config,
                    "series": [
                        {"t_s": t, "metric": metric, "value": value}
                        for t, metric, value in result.series
                    ],
                },
                runs_dir / f"{name}.json",
            )
            written.append(runs_dir / f"{name}.json")

    logger.info(f"Exported {len(results)} runs to {root}")
    return written
