"""
Configuration management for the edge offload simulator.
Application settings load from environment variables; simulation scenarios
load from flat `key = value` files with dotted section keys.
"""

import copy
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationError,
    model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from utils.errors import ConfigError

WORKLOAD_NAMES = ("matmult", "image", "io", "mixed")
BASE_PROFILE_NAMES = ("matmult", "image", "io")
AUTO_SPLIT = "auto"
DEFAULT_SPLITS = ("0", "25", "50", "75", "100", AUTO_SPLIT)


def get_project_root() -> Path:
    """Get the project root directory."""
    return Path(__file__).parent


def create_required_directories(config: 'Settings') -> None:
    """Create required directories if they don't exist."""
    Path(config.LOG_DIR).mkdir(parents=True, exist_ok=True)


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Logging
    LOG_LEVEL: str = Field(default="INFO", description="Logging level")
    LOG_DIR: str = Field(default="./logs", description="Directory for log files")

    # Experiments
    OUTPUT_DIR: str = Field(default="./results", description="Default output directory")
    DEFAULT_CONFIG_PATH: str = Field(
        default=str(get_project_root() / "conf" / "default.conf"),
        description="Scenario file used when none is given"
    )
    SWEEP_WORKERS: int = Field(default=1, ge=1, description="Parallel sweep processes")

    # HTTP surface
    APP_HOST: str = Field(default="0.0.0.0", description="Application host")
    APP_PORT: int = Field(default=8000, description="Application port")

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _empty_to_none(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in ("", "none", "null"):
        return None
    return value


def normalize_split(value: Union[str, float, int]) -> str:
    """
    Canonical label for a traffic split.

    Args:
        value: "auto" or a percentage in [0, 100]

    Returns:
        "auto" or the percentage without trailing zeros ("25", "12.5")
    """
    text = str(value).strip().lower()
    if text == AUTO_SPLIT:
        return AUTO_SPLIT
    try:
        pct = float(text)
    except ValueError:
        raise ValueError(f"split '{value}' is neither 'auto' nor a percentage")
    if not 0.0 <= pct <= 100.0:
        raise ValueError(f"split {pct} outside [0, 100]")
    return f"{pct:g}"


def _normalize_splits(value: Any) -> Any:
    value = _split_list(value)
    if isinstance(value, list):
        return [normalize_split(item) for item in value]
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MetricsConfig(_Section):
    """Latency window and scrape cadence."""
    window_s: float = Field(default=30.0, gt=0)
    min_samples: int = Field(default=10, ge=1)
    scrape_interval_s: float = Field(default=1.0, gt=0)


class OffloadConfig(_Section):
    """Constants of the latency-ratio offloading controller."""
    c_decay: float = Field(default=0.9, gt=0, le=1)
    c_t: int = Field(default=15, ge=0)
    c_soft: float = Field(default=2.0, gt=1)
    c_hard: float = Field(default=5.0, gt=1)
    c_in: float = Field(default=0.9, ge=0, lt=1)
    control_interval_s: float = Field(default=2.0, gt=0)
    sample_scope: Literal["all", "edge_only"] = "all"

    @model_validator(mode="after")
    def _limits_ordered(self) -> "OffloadConfig":
        if not self.c_soft < self.c_hard:
            raise ValueError(f"c_soft ({self.c_soft}) must be below c_hard ({self.c_hard})")
        return self


class GatewayConfig(_Section):
    mode: Literal["fixed", "auto"] = "auto"
    fixed_pct: float = Field(default=0.0, ge=0, le=100)
    rng_seed: Annotated[Optional[int], BeforeValidator(_empty_to_none)] = Field(default=None, ge=0)


class NodeConfig(_Section):
    node_id: str = Field(min_length=1)
    speed_factor: float = Field(gt=0)
    max_instances: int = Field(ge=0)
    cores: int = Field(default=1, ge=1)


def _parse_nodes(value: Any) -> Any:
    if not isinstance(value, str):
        return value
    nodes = []
    for entry in _split_list(value):
        parts = [part.strip() for part in entry.split(":")]
        if len(parts) not in (3, 4):
            raise ValueError(
                f"node entry '{entry}' must look like id:speed_factor:max_instances[:cores]"
            )
        node = {"node_id": parts[0], "speed_factor": parts[1], "max_instances": parts[2]}
        if len(parts) == 4:
            node["cores"] = parts[3]
        nodes.append(node)
    return nodes


class PoolConfig(_Section):
    nodes: Annotated[List[NodeConfig], BeforeValidator(_parse_nodes)] = Field(min_length=1)
    cold_start_s: float = Field(ge=0)

    @model_validator(mode="after")
    def _unique_ids(self) -> "PoolConfig":
        ids = [node.node_id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate node ids in {ids}")
        return self


def _default_edge_pool() -> PoolConfig:
    return PoolConfig(
        nodes="pi-1:1.0:3:1, pi-2:1.0:3:1, pi-3:1.0:3:1, pi-4:1.0:3:1, x64-1:2.0:3:2",
        cold_start_s=2.0,
    )


def _default_cloud_pool() -> PoolConfig:
    return PoolConfig(nodes="vm-1:4.0:64:64", cold_start_s=1.0)


class ClusterConfig(_Section):
    edge: PoolConfig = Field(default_factory=_default_edge_pool)
    cloud: PoolConfig = Field(default_factory=_default_cloud_pool)
    concurrency_limit: int = Field(default=4, ge=1)
    queue_cap: int = Field(default=10, ge=0)


class AutoscalerConfig(_Section):
    """Concurrency-based autoscaler with scale-to-zero."""
    target_concurrency: int = Field(default=3, ge=1)
    scale_window_s: float = Field(default=10.0, gt=0)
    idle_timeout_s: float = Field(default=30.0, gt=0)
    tick_s: float = Field(default=2.0, gt=0)
    min_instances: int = Field(default=0, ge=0, le=0)
    max_instances_per_function: int = Field(default=5, ge=1)


class NetworkConfig(_Section):
    rtt_s: float = Field(default=0.05, ge=0)
    bandwidth_bytes_per_s: float = Field(default=100e6, gt=0)
    shared_pipe: bool = True


class ProfileConfig(_Section):
    compute_s: float = Field(ge=0)
    io_s: float = Field(ge=0)
    request_bytes: int = Field(ge=0)
    response_bytes: int = Field(ge=0)
    memory_mb: float = Field(ge=0)


class WorkloadConfig(_Section):
    """Workload selection, ramp schedule and per-profile demands."""
    name: Literal["matmult", "image", "io", "mixed"] = "mixed"
    low_rate: float = Field(default=2.0, ge=0)
    high_rate: float = Field(default=20.0, ge=0)
    warm_s: float = Field(default=60.0, gt=0)
    ramp_s: float = Field(default=60.0, gt=0)
    hold_s: float = Field(default=120.0, gt=0)
    tail_s: float = Field(default=0.0, ge=0)
    matmult: ProfileConfig = ProfileConfig(
        compute_s=0.65, io_s=0.0, request_bytes=3_000_000, response_bytes=3_000_000, memory_mb=128
    )
    image: ProfileConfig = ProfileConfig(
        compute_s=0.50, io_s=0.05, request_bytes=1_000_000, response_bytes=200_000, memory_mb=96
    )
    io: ProfileConfig = ProfileConfig(
        compute_s=0.0, io_s=0.60, request_bytes=65_536, response_bytes=65_536, memory_mb=64
    )

    @model_validator(mode="after")
    def _rates_ordered(self) -> "WorkloadConfig":
        if self.low_rate > self.high_rate:
            raise ValueError(f"low_rate ({self.low_rate}) exceeds high_rate ({self.high_rate})")
        return self


class ReplicationConfig(_Section):
    manifest: Annotated[Optional[str], BeforeValidator(_empty_to_none)] = None
    image_registry: str = "registry.local/functions"


class RunConfig(_Section):
    seed: int = Field(default=42, ge=0)
    drain_s: float = Field(default=30.0, ge=0)
    deadline_s: Annotated[Optional[float], BeforeValidator(_empty_to_none)] = Field(default=None, gt=0)


class SweepConfig(_Section):
    workloads: Annotated[
        List[Literal["matmult", "image", "io", "mixed"]], BeforeValidator(_split_list)
    ] = Field(default_factory=lambda: list(WORKLOAD_NAMES), min_length=1)
    splits: Annotated[List[str], BeforeValidator(_normalize_splits)] = Field(
        default_factory=lambda: list(DEFAULT_SPLITS), min_length=1
    )
    repetitions: int = Field(default=1, ge=1)


class SimulationConfig(_Section):
    """Complete scenario description for one run or sweep."""
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    offload: OffloadConfig = Field(default_factory=OffloadConfig)
    gateway: GatewayConfig = Field(default_factory=GatewayConfig)
    cluster: ClusterConfig = Field(default_factory=ClusterConfig)
    autoscaler: AutoscalerConfig = Field(default_factory=AutoscalerConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    workload: WorkloadConfig = Field(default_factory=WorkloadConfig)
    replication: ReplicationConfig = Field(default_factory=ReplicationConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)


def parse_flat_config(text: str, source: str = "<string>") -> Dict[str, str]:
    """
    Parse `key = value` lines.

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        Mapping of dotted keys to raw string values

    Raises:
        ConfigError: If a line is not a key/value pair
    """
    flat: Dict[str, str] = {}
    problems = []
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{number}: expected 'key = value', got '{raw.strip()}'")
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        if not key or any(not part for part in key.split(".")):
            problems.append(f"{source}:{number}: malformed key '{key}'")
            continue
        flat[key] = value.strip()
    if problems:
        raise ConfigError(f"Cannot parse {source}", problems)
    return flat


def nest_flat(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """Turn {'a.b': v} into {'a': {'b': v}}."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("Conflicting keys", [f"{key}: '{part}' is both a value and a section"])
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError("Conflicting keys", [f"{key}: is both a value and a section"])
        node[parts[-1]] = value
    return nested


def _deep_merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def format_diagnostics(exc: ValidationError) -> List[str]:
    """Field-level messages such as 'offload.c_soft: Input should be greater than 1'."""
    diagnostics = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or "<root>"
        diagnostics.append(f"{location}: {error['msg']}")
    return diagnostics


def build_config(flat: Optional[Mapping[str, Any]] = None) -> SimulationConfig:
    """
    Validate flat overrides on top of the model defaults.

    Args:
        flat: Dotted keys to values (strings are coerced)

    Returns:
        Validated SimulationConfig

    Raises:
        ConfigError: With one diagnostic per invalid field
    """
    base = SimulationConfig().model_dump()
    merged = _deep_merge(base, nest_flat(flat or {}))
    try:
        return SimulationConfig.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError("Invalid configuration", format_diagnostics(exc))


def parse_override(item: str) -> Tuple[str, str]:
    """Split a CLI override 'key=value'."""
    if "=" not in item:
        raise ConfigError("Invalid override", [f"'{item}' is not key=value"])
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None
) -> SimulationConfig:
    """
    Load a scenario file and apply overrides.

    Args:
        path: Flat config file; None uses the model defaults only
        overrides: Dotted keys applied after the file

    Returns:
        Validated SimulationConfig
    """
    flat: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError("Config file not found", [str(config_path)])
        flat.update(parse_flat_config(config_path.read_text(encoding="utf-8"), str(config_path)))
        manifest = flat.get("replication.manifest")
        if manifest and not Path(manifest).is_absolute():
            flat["replication.manifest"] = str((config_path.parent / manifest).resolve())
    flat.update(overrides or {})
    return build_config(flat)


def config_snapshot(config: SimulationConfig) -> Dict[str, Any]:
    """JSON-ready copy of the effective configuration."""
    return config.model_dump(mode="json")


def load_settings() -> Settings:
    """Load and validate application settings."""
    settings = Settings()
    create_required_directories(settings)
    return settings


# Global settings instance
settings = load_settings()
