"""
Workload profiles.

A profile holds the per-request demands of one function: compute seconds at
reference speed, I/O seconds, payload sizes and the instance memory footprint.
The mixed workload has no demands of its own and picks one of the three base
profiles per request.
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from config import BASE_PROFILE_NAMES, WorkloadConfig
from gateway.router import Request
from utils.errors import ContractViolation

MIXED = "mixed"


@dataclass(frozen=True)
class WorkloadProfile:
    name: str
    compute_s: float = 0.0
    io_s: float = 0.0
    request_bytes: int = 0
    response_bytes: int = 0
    memory_mb: float = 0.0
    components: Tuple["WorkloadProfile", ...] = ()

    def __post_init__(self):
        for attr in ("compute_s", "io_s", "request_bytes", "response_bytes", "memory_mb"):
            if getattr(self, attr) < 0:
                raise ContractViolation(f"profile {self.name}: {attr} must be non-negative")

    @property
    def is_mixed(self) -> bool:
        return bool(self.components)


def build_profiles(cfg: WorkloadConfig) -> Dict[str, WorkloadProfile]:
    """
    Build the three base profiles and the mixed profile from config.

    Args:
        cfg: Workload section of the simulation config

    Returns:
        Profiles keyed by name
    """
    profiles: Dict[str, WorkloadProfile] = {}
    for name in BASE_PROFILE_NAMES:
        section = getattr(cfg, name)
        profiles[name] = WorkloadProfile(
            name=name,
            compute_s=section.compute_s,
            io_s=section.io_s,
            request_bytes=section.request_bytes,
            response_bytes=section.response_bytes,
            memory_mb=section.memory_mb,
        )
    profiles[MIXED] = WorkloadProfile(
        name=MIXED, components=tuple(profiles[name] for name in BASE_PROFILE_NAMES)
    )
    return profiles


def functions_for(profile: WorkloadProfile) -> Tuple[WorkloadProfile, ...]:
    """Base profiles a workload can emit."""
    return profile.components if profile.is_mixed else (profile,)


def make_request(
    profile: WorkloadProfile,
    rng: np.random.Generator,
    request_id: int = 0,
    arrival_time: float = 0.0
) -> Request:
    """
    Create one request for a workload.

    Args:
        profile: Workload profile; mixed draws a base profile uniformly
        rng: Mix stream (only drawn from for mixed)
        request_id: Request identifier
        arrival_time: Simulated arrival time

    Returns:
        Request whose function_id is the base profile name
    """
    if profile.is_mixed:
        profile = profile.components[int(rng.integers(len(profile.components)))]
    return Request(
        id=request_id,
        function_id=profile.name,
        arrival_time=arrival_time,
        profile=profile,
        request_bytes=profile.request_bytes,
        response_bytes=profile.response_bytes,
    )
