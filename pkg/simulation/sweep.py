"""
Experiment sweeps over (workload, split) cells.

Every cell runs with the same repetition seed, so all splits of a workload
see the identical arrival sequence. Cells may run in worker processes; the
results are always returned in matrix order.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from config import AUTO_SPLIT, WORKLOAD_NAMES, SimulationConfig, normalize_split
from simulation.engine import RunResult, run
from utils.errors import ContractViolation
from utils.logger import get_logger
from utils.rng import derive_seed

logger = get_logger(__name__)


@dataclass(frozen=True)
class Cell:
    workload: str
    split: str
    repetition: int
    seed: int

    @property
    def label(self) -> str:
        return f"{self.workload}_{self.split}_{self.repetition}"


@dataclass(frozen=True)
class ExperimentMatrix:
    workloads: Tuple[str, ...]
    splits: Tuple[str, ...]
    repetitions: int = 1
    base_seed: int = 42

    def __post_init__(self):
        if not self.workloads or not self.splits:
            raise ContractViolation("experiment matrix needs at least one workload and one split")
        if self.repetitions < 1:
            raise ContractViolation(f"repetitions must be at least 1, got {self.repetitions}")
        unknown = [name for name in self.workloads if name not in WORKLOAD_NAMES]
        if unknown:
            raise ContractViolation(f"unknown workloads {unknown}")
        object.__setattr__(self, "workloads", tuple(self.workloads))
        object.__setattr__(self, "splits", tuple(normalize_split(split) for split in self.splits))

    @classmethod
    def from_config(cls, config: SimulationConfig) -> "ExperimentMatrix":
        return cls(
            workloads=tuple(config.sweep.workloads),
            splits=tuple(config.sweep.splits),
            repetitions=config.sweep.repetitions,
            base_seed=config.run.seed,
        )

    def seed_for(self, repetition: int) -> int:
        """Base seed for the first repetition, derived seeds after that."""
        if repetition == 0:
            return self.base_seed
        return derive_seed(self.base_seed, f"repetition-{repetition}")

    def cells(self) -> List[Cell]:
        return [
            Cell(workload, split, repetition, self.seed_for(repetition))
            for workload in self.workloads
            for split in self.splits
            for repetition in range(self.repetitions)
        ]


@dataclass(frozen=True)
class CellError:
    workload: str
    split: str
    repetition: int
    seed: int
    error: str


@dataclass
class SweepResult:
    matrix: ExperimentMatrix
    results: List[RunResult] = field(default_factory=list)
    errors: List[CellError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def cell_config(config: SimulationConfig, cell: Cell) -> SimulationConfig:
    """Config of one cell: workload, split and seed replaced."""
    if cell.split == AUTO_SPLIT:
        gateway = config.gateway.model_copy(update={"mode": "auto"})
    else:
        gateway = config.gateway.model_copy(update={"mode": "fixed", "fixed_pct": float(cell.split)})
    return config.model_copy(update={
        "workload": config.workload.model_copy(update={"name": cell.workload}),
        "gateway": gateway,
        "run": config.run.model_copy(update={"seed": cell.seed}),
    })


def run_cell(config: SimulationConfig, cell: Cell) -> RunResult:
    result = run(cell_config(config, cell))
    result.repetition = cell.repetition
    return result


def _record(outcome: SweepResult, cell: Cell, result: Union[RunResult, BaseException]) -> None:
    if isinstance(result, BaseException):
        logger.error(f"Cell {cell.label} failed: {result}")
        outcome.errors.append(CellError(cell.workload, cell.split, cell.repetition, cell.seed, str(result)))
    else:
        outcome.results.append(result)


def sweep(
    config: SimulationConfig,
    matrix: Optional[ExperimentMatrix] = None,
    workers: int = 1
) -> SweepResult:
    """
    Run every cell of an experiment matrix.

    Args:
        config: Base simulation config
        matrix: Cells to run; defaults to the sweep section of the config
        workers: Worker processes (1 runs in-process)

    Returns:
        SweepResult with results in matrix order and one error per failed cell
    """
    matrix = matrix or ExperimentMatrix.from_config(config)
    cells = matrix.cells()
    outcome = SweepResult(matrix=matrix)
    logger.info(
        f"Sweeping {len(matrix.workloads)} workloads x {len(matrix.splits)} splits x "
        f"{matrix.repetitions} repetitions = {len(cells)} cells ({workers} workers)"
    )

    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(run_cell, config, cell) for cell in cells]
            for cell, future in zip(cells, futures):
                try:
                    _record(outcome, cell, future.result())
                except Exception as e:
                    _record(outcome, cell, e)
    else:
        for cell in cells:
            try:
                _record(outcome, cell, run_cell(config, cell))
            except Exception as e:
                _record(outcome, cell, e)

    logger.info(f"Sweep finished: {len(outcome.results)} cells ok, {len(outcome.errors)} failed")
    return outcome


def select_workers(requested: Optional[int], default: int, cells: Sequence[Cell]) -> int:
    workers = requested if requested is not None else default
    return max(1, min(workers, len(cells)))
