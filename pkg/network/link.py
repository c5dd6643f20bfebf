"""
Edge-to-cloud link.

The link is a FIFO byte pipe of fixed bandwidth plus a round-trip delay that
only offloaded traffic pays. With shared_pipe both directions queue on the
same pipe; otherwise uploads and downloads have a pipe each. Every transfer
is kept in a ledger, so throughput can be measured over any interval that
starts after the last prune horizon.
"""

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

from config import NetworkConfig
from gateway.router import Request
from utils.errors import ContractViolation
from utils.logger import get_logger

logger = get_logger(__name__)


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class LinkSpec:
    rtt: float = 0.05
    bandwidth: float = 100e6
    shared_pipe: bool = True

    def __post_init__(self):
        if self.rtt < 0:
            raise ContractViolation(f"rtt must be non-negative, got {self.rtt}")
        if not self.bandwidth > 0:
            raise ContractViolation(f"bandwidth must be positive, got {self.bandwidth}")

    @classmethod
    def from_config(cls, cfg: NetworkConfig) -> "LinkSpec":
        return cls(rtt=cfg.rtt_s, bandwidth=cfg.bandwidth_bytes_per_s, shared_pipe=cfg.shared_pipe)


@dataclass(frozen=True)
class Transfer:
    nbytes: int
    enqueue_time: float
    start_time: float
    finish_time: float
    direction: Direction


@dataclass
class Pipe:
    busy_until: float = 0.0
    ledger: List[Transfer] = field(default_factory=list)
    finishes: List[float] = field(default_factory=list)


@dataclass
class LinkState:
    spec: LinkSpec
    up: Pipe
    down: Pipe

    @classmethod
    def idle(cls, spec: LinkSpec) -> "LinkState":
        up = Pipe()
        return cls(spec=spec, up=up, down=up if spec.shared_pipe else Pipe())

    def pipe(self, direction: Direction) -> Pipe:
        return self.up if direction == Direction.UP else self.down

    def pipes(self) -> Tuple[Pipe, ...]:
        return (self.up,) if self.up is self.down else (self.up, self.down)

    @property
    def capacity(self) -> float:
        """Aggregate bytes/s over all pipes."""
        return self.spec.bandwidth * len(self.pipes())


def transfer_time(link: LinkState, nbytes: int, now: float, direction: Direction = Direction.UP) -> float:
    """
    Reserve the pipe for a transfer.

    Args:
        link: Link state
        nbytes: Payload size in bytes
        now: Time the transfer is enqueued
        direction: Upload (toward the cloud) or download

    Returns:
        Completion time, including waiting behind earlier transfers
    """
    if nbytes < 0:
        raise ContractViolation(f"transfer size must be non-negative, got {nbytes}")
    pipe = link.pipe(direction)
    start = max(now, pipe.busy_until)
    if nbytes == 0:
        return start
    finish = start + nbytes / link.spec.bandwidth
    pipe.busy_until = finish
    pipe.ledger.append(Transfer(nbytes, now, start, finish, direction))
    pipe.finishes.append(finish)
    return finish


def offload_latency(link: LinkState, req: Request, cloud_service_time: float, now: float) -> float:
    """
    End-to-end latency of an offloaded request on an otherwise static link.

    Args:
        link: Link state; both transfers are reserved on it
        req: Request routed to the cloud
        cloud_service_time: Execution time in the cloud
        now: Arrival time at the gateway

    Returns:
        Upload + rtt + service + download, measured from `now`
    """
    half_rtt = link.spec.rtt / 2.0
    uploaded = transfer_time(link, req.request_bytes, now, Direction.UP)
    served = uploaded + half_rtt + cloud_service_time
    downloaded = transfer_time(link, req.response_bytes, served, Direction.DOWN)
    total = downloaded + half_rtt - now
    logger.trace(
        f"Offload {req.id}: upload={uploaded - now:.4f}s rtt={link.spec.rtt:.4f}s "
        f"service={cloud_service_time:.4f}s download={downloaded - served:.4f}s"
    )
    return total


def _pipe_bytes(pipe: Pipe, t0: float, t1: float) -> float:
    moved = 0.0
    index = bisect.bisect_right(pipe.finishes, t0)
    for transfer in pipe.ledger[index:]:
        if transfer.start_time >= t1:
            break
        duration = transfer.finish_time - transfer.start_time
        overlap = min(transfer.finish_time, t1) - max(transfer.start_time, t0)
        if overlap > 0 and duration > 0:
            moved += transfer.nbytes * overlap / duration
    return moved


def throughput_between(link: LinkState, t0: float, t1: float) -> float:
    """Average bytes/s moved over [t0, t1), summed over pipes."""
    if t1 <= t0:
        raise ContractViolation(f"empty interval [{t0}, {t1})")
    return sum(_pipe_bytes(pipe, t0, t1) for pipe in link.pipes()) / (t1 - t0)


def utilization_between(link: LinkState, t0: float, t1: float) -> float:
    if math.isinf(link.spec.bandwidth):
        return 0.0
    return throughput_between(link, t0, t1) / link.capacity


def prune_ledger(link: LinkState, horizon: float) -> int:
    """Drop transfers that finished by `horizon`; returns how many."""
    dropped = 0
    for pipe in link.pipes():
        cut = bisect.bisect_right(pipe.finishes, horizon)
        del pipe.ledger[:cut]
        del pipe.finishes[:cut]
        dropped += cut
    return dropped
