"""
Service definitions and the selective merge.

Only an allowlist of spec fields is owned by the cloud. Edge-local status and
annotations outside the reserved prefix are never overwritten, so applying
a merged definition cannot trigger another apply.
"""

import copy
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from config import parse_flat_config
from utils.errors import ConfigError, ContractViolation
from utils.sites import Site

MANAGED_FIELDS = ("image", "profile", "concurrency_limit", "env")
MANAGED_PREFIX = "edge.managed/"
SOURCE_GENERATION = f"{MANAGED_PREFIX}source-generation"


class ServiceSpec(BaseModel):
    """A replicated function definition."""
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    generation: int = Field(default=0, ge=0)
    managed_spec: Dict[str, Any] = Field(default_factory=dict)
    status: Dict[str, Any] = Field(default_factory=dict)
    annotations: Dict[str, str] = Field(default_factory=dict)

    @field_validator("managed_spec")
    @classmethod
    def _allowlisted(cls, value: Dict[str, Any]) -> Dict[str, Any]:
        unknown = sorted(set(value) - set(MANAGED_FIELDS))
        if unknown:
            raise ValueError(f"fields {unknown} are not managed fields {list(MANAGED_FIELDS)}")
        return value

    @property
    def function_id(self) -> str:
        return str(self.managed_spec.get("profile", self.name))

    @property
    def concurrency_limit(self) -> Optional[int]:
        value = self.managed_spec.get("concurrency_limit")
        return int(value) if value is not None else None

    def is_replicated(self) -> bool:
        return SOURCE_GENERATION in self.annotations


class WatchEventType(str, Enum):
    ADDED = "Added"
    MODIFIED = "Modified"
    DELETED = "Deleted"


class WatchEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: Site
    kind: WatchEventType
    spec: ServiceSpec


def _managed_annotations(spec: ServiceSpec) -> Dict[str, str]:
    return {k: v for k, v in spec.annotations.items() if k.startswith(MANAGED_PREFIX)}


def merge(cloud: ServiceSpec, edge: ServiceSpec) -> ServiceSpec:
    """
    Overwrite the managed fields of the edge definition with the cloud's.

    Args:
        cloud: Source-of-truth definition
        edge: Current edge definition

    Returns:
        Copy of the edge definition with the cloud's managed_spec and the
        bookkeeping annotation set; status and foreign annotations untouched

    Raises:
        ContractViolation: If the names differ
    """
    if cloud.name != edge.name:
        raise ContractViolation(f"cannot merge '{cloud.name}' into '{edge.name}'")
    annotations = {k: v for k, v in edge.annotations.items() if not k.startswith(MANAGED_PREFIX)}
    annotations[SOURCE_GENERATION] = str(cloud.generation)
    return edge.model_copy(
        update={
            "managed_spec": copy.deepcopy(cloud.managed_spec),
            "annotations": annotations,
            "status": copy.deepcopy(edge.status),
        }
    )


def needs_apply(merged: ServiceSpec, current_edge: ServiceSpec) -> bool:
    """True iff managed fields or bookkeeping annotations differ; status is ignored."""
    return (
        merged.managed_spec != current_edge.managed_spec
        or _managed_annotations(merged) != _managed_annotations(current_edge)
    )


def default_services(
    functions: Iterable[str],
    concurrency_limit: int,
    image_registry: str
) -> List[ServiceSpec]:
    """One service per function, named after it."""
    return [
        ServiceSpec(
            name=function_id,
            managed_spec={
                "image": f"{image_registry}/{function_id}:latest",
                "profile": function_id,
                "concurrency_limit": concurrency_limit,
                "env": {},
            },
        )
        for function_id in functions
    ]


def load_manifest(
    path: Union[str, Path],
    image_registry: str,
    default_concurrency: int
) -> List[ServiceSpec]:
    """
    Read service definitions from a flat manifest.

    Lines look like `<service>.profile = matmult`, `<service>.concurrency_limit = 4`,
    `<service>.image = ...` or `<service>.env.<KEY> = value`.

    Args:
        path: Manifest file
        image_registry: Registry used for services without an image
        default_concurrency: Limit for services without one

    Returns:
        Service definitions in file order

    Raises:
        ConfigError: On unreadable files or unknown fields
    """
    manifest = Path(path)
    if not manifest.is_file():
        raise ConfigError("Service manifest not found", [str(manifest)])
    flat = parse_flat_config(manifest.read_text(encoding="utf-8"), str(manifest))

    records: Dict[str, Dict[str, Any]] = {}
    problems = []
    for key, value in flat.items():
        name, _, field_path = key.partition(".")
        record = records.setdefault(name, {"env": {}})
        if field_path.startswith("env."):
            record["env"][field_path[len("env."):]] = value
        elif field_path in ("image", "profile"):
            record[field_path] = value
        elif field_path == "concurrency_limit":
            try:
                record[field_path] = int(value)
            except ValueError:
                problems.append(f"{key}: expected an integer, got '{value}'")
                continue
            if record[field_path] < 1:
                problems.append(f"{key}: must be at least 1")
        else:
            problems.append(f"{key}: unknown service field '{field_path}'")
    if problems:
        raise ConfigError(f"Invalid service manifest {manifest}", problems)

    services = []
    for name, record in records.items():
        profile = record.get("profile", name)
        services.append(ServiceSpec(
            name=name,
            managed_spec={
                "image": record.get("image", f"{image_registry}/{profile}:latest"),
                "profile": profile,
                "concurrency_limit": record.get("concurrency_limit", default_concurrency),
                "env": record["env"],
            },
        ))
    return services
