"""
FastAPI application for the offloading simulator.
Launches single runs and sweeps and returns their summaries as JSON.
"""

from fastapi import FastAPI, HTTPException, Request # type: ignore
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from typing import Optional, Dict, Any, List, Literal
from contextlib import asynccontextmanager
import uvicorn

from dotenv import load_dotenv
load_dotenv()


from config import SimulationConfig, config_snapshot, load_config, normalize_split, settings
from simulation.engine import run
from simulation.sweep import Cell, ExperimentMatrix, cell_config, sweep
from utils.errors import ConfigError
from utils.logger import get_logger

logger = get_logger(__name__)

# Scenario loaded at startup
base_config: Optional[SimulationConfig] = None

WorkloadName = Literal["matmult", "image", "io", "mixed"]


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Lifespan context manager for startup and shutdown events.
    """
    # Startup
    global base_config
    logger.info("Starting application...")
    base_config = load_config(settings.DEFAULT_CONFIG_PATH)
    logger.info(f"Loaded scenario from {settings.DEFAULT_CONFIG_PATH}")

    yield

    # Shutdown
    logger.info("Shutting down application...")


# Initialize FastAPI app
app = FastAPI(
    title="Edge Offload Simulator",
    description="Discrete-event simulation of latency-driven edge-to-cloud offloading",
    version="1.0.0",
    lifespan=lifespan
)


# Request/Response Models
class RunRequest(BaseModel):
    """Single run request."""
    workload: WorkloadName = "mixed"
    split: str = Field(default="auto", description="0-100 or 'auto'")
    seed: Optional[int] = Field(default=None, ge=0)
    overrides: Dict[str, str] = Field(default_factory=dict, description="Dotted config keys")
    include_series: bool = False


class SweepRequest(BaseModel):
    """Sweep request."""
    workloads: List[WorkloadName] = Field(default_factory=lambda: ["matmult", "image", "io", "mixed"])
    splits: List[str] = Field(default_factory=lambda: ["0", "25", "50", "75", "100", "auto"])
    repetitions: int = Field(default=1, ge=1, le=10)
    seed: Optional[int] = Field(default=None, ge=0)
    overrides: Dict[str, str] = Field(default_factory=dict)


class SummaryRow(BaseModel):
    workload: str
    split: str
    repetition: int
    seed: int
    successful: int
    failed: int
    mean_latency_s: float
    p95_latency_s: float


class SweepResponse(BaseModel):
    rows: List[SummaryRow]
    errors: List[Dict[str, Any]]


def _scenario(overrides: Dict[str, str]) -> SimulationConfig:
    if not overrides:
        return base_config or load_config(settings.DEFAULT_CONFIG_PATH)
    return load_config(settings.DEFAULT_CONFIG_PATH, overrides)


# Exception handlers
@app.exception_handler(ConfigError)
async def config_exception_handler(request: Request, exc: ConfigError):
    """Invalid scenario parameters."""
    logger.warning(f"Rejected configuration: {exc}")
    return JSONResponse(
        status_code=422,
        content={"error": "Invalid configuration", "diagnostics": exc.diagnostics}
    )


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """Global exception handler."""
    logger.error(f"Unhandled exception: {exc}")
    return JSONResponse(
        status_code=500,
        content={
            "error": "Internal server error",
            "detail": "The simulation failed. Check the server logs."
        }
    )


# Health check endpoint
@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "scenario_loaded": base_config is not None
    }


@app.get("/config")
async def effective_config():
    """
    Effective default scenario.

    Returns:
        Config snapshot as nested JSON
    """
    return config_snapshot(_scenario({}))


@app.post("/runs")
def create_run(request: RunRequest):
    """
    Simulate one (workload, split) cell.

    Args:
        request: Workload, split, seed and config overrides

    Returns:
        Run summary, plus the time series when requested
    """
    try:
        split = normalize_split(request.split)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    config = _scenario(request.overrides)
    seed = request.seed if request.seed is not None else config.run.seed
    cell = Cell(workload=request.workload, split=split, repetition=0, seed=seed)
    logger.info(f"Received run request: {request.workload} @ {split} (seed {seed})")

    result = run(cell_config(config, cell))
    body: Dict[str, Any] = {"summary": result.summary()}
    if request.include_series:
        body["series"] = [
            {"t_s": t, "metric": metric, "value": value} for t, metric, value in result.series
        ]
    return body


@app.post("/sweeps", response_model=SweepResponse)
def create_sweep(request: SweepRequest):
    """
    Run a workload x split matrix.

    Args:
        request: Matrix definition and config overrides

    Returns:
        One summary row per cell and repetition, plus failed cells
    """
    config = _scenario(request.overrides)
    try:
        matrix = ExperimentMatrix(
            workloads=tuple(request.workloads),
            splits=tuple(request.splits),
            repetitions=request.repetitions,
            base_seed=request.seed if request.seed is not None else config.run.seed,
        )
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    logger.info(f"Received sweep request: {len(matrix.cells())} cells")

    outcome = sweep(config, matrix, workers=1)
    return SweepResponse(
        rows=[SummaryRow(**result.summary()) for result in outcome.results],
        errors=[error.__dict__ for error in outcome.errors],
    )


# Root endpoint
@app.get("/")
async def root():
    """
    Root endpoint with API information.

    Returns:
        API information
    """
    return {
        "name": "Edge Offload Simulator API",
        "version": "1.0.0",
        "status": "running",
        "endpoints": {
            "runs": "/runs",
            "sweeps": "/sweeps",
            "config": "/config",
            "health": "/health",
            "docs": "/docs"
        }
    }


def run_server():
    """Run the FastAPI server."""
    logger.info(f"Starting server on {settings.APP_HOST}:{settings.APP_PORT}")

    uvicorn.run(
        "app:app",
        host=settings.APP_HOST,
        port=settings.APP_PORT,
        reload=False,
        log_level=settings.LOG_LEVEL.lower()
    )


if __name__ == "__main__":
    run_server()
