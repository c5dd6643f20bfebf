"""
Execution pool model.

A pool is a set of nodes hosting function instances. Each instance admits up
to concurrency_limit requests and queues the rest FIFO; each admitted request
then needs one core of its node for its whole service time, waiting in the
node's FIFO run queue when all cores are busy. Instances start cold and only
admit work once ready.
"""

import bisect
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, List, Optional, Tuple

from config import AutoscalerConfig, ClusterConfig, PoolConfig
from gateway.router import Request
from utils.errors import ContractViolation, InvariantViolation
from utils.logger import get_logger
from utils.sites import Site

logger = get_logger(__name__)


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    speed_factor: float
    max_instances: int
    cores: int = 1

    def __post_init__(self):
        if self.speed_factor <= 0:
            raise ContractViolation(f"node {self.node_id}: speed_factor must be positive")
        if self.max_instances < 0 or self.cores < 1:
            raise ContractViolation(f"node {self.node_id}: invalid capacity")


@dataclass
class Node:
    spec: NodeSpec
    busy_cores: int = 0
    instance_count: int = 0
    run_queue: Deque[Tuple[Request, str]] = field(default_factory=deque)


@dataclass
class FunctionInstance:
    instance_id: str
    function_id: str
    node_id: str
    concurrency_limit: int
    memory_mb: float = 0.0
    in_flight: int = 0
    queue: Deque[Request] = field(default_factory=deque)
    idle_since: Optional[float] = None
    cold_until: Optional[float] = None
    order: int = 0

    @property
    def is_cold(self) -> bool:
        return self.cold_until is not None

    @property
    def load(self) -> int:
        return self.in_flight + len(self.queue)


@dataclass
class LoadTracker:
    """Time-weighted integral of a function's concurrency (running + queued)."""
    level: int = 0
    last_change: float = 0.0
    integral: float = 0.0
    checkpoints: Deque[Tuple[float, float]] = field(default_factory=deque)
    idle_since: Optional[float] = None

    def cumulative(self, now: float) -> float:
        return self.integral + self.level * (now - self.last_change)

    def change(self, now: float, delta: int) -> None:
        self.integral = self.cumulative(now)
        self.last_change = now
        self.level += delta
        self.idle_since = now if self.level == 0 else None

    def idle_for(self, now: float) -> float:
        """Seconds since the function last held any request (0 while busy)."""
        if self.level > 0 or self.idle_since is None:
            return 0.0
        return now - self.idle_since


class DispatchOutcome(str, Enum):
    ASSIGNED = "assigned"
    QUEUED = "queued"
    FAILED = "failed"


@dataclass(frozen=True)
class Started:
    """A request that got a core; it completes at finish_time."""
    request: Request
    instance_id: str
    start_time: float
    finish_time: float


@dataclass
class DispatchResult:
    outcome: DispatchOutcome
    instance_id: Optional[str] = None
    started: List[Started] = field(default_factory=list)
    new_instances: List[FunctionInstance] = field(default_factory=list)


@dataclass(frozen=True)
class ResourceSample:
    cpu_util: float
    memory_mb: float
    instances: int
    in_flight: int
    queued: int


@dataclass
class Pool:
    site: Site
    nodes: Dict[str, Node]
    queue_cap: int = 10
    cold_start_delay: float = 0.0
    default_concurrency: int = 4
    max_per_function: int = 5
    concurrency_limits: Dict[str, int] = field(default_factory=dict)
    memory_mb: Dict[str, float] = field(default_factory=dict)
    instances: Dict[str, FunctionInstance] = field(default_factory=dict)
    trackers: Dict[str, LoadTracker] = field(default_factory=dict)
    created: int = 0
    compute_starts: List[float] = field(default_factory=list)
    compute_ends: List[float] = field(default_factory=list)
    longest_compute: float = 0.0

    @classmethod
    def from_config(
        cls,
        site: Site,
        pool_cfg: PoolConfig,
        cluster_cfg: ClusterConfig,
        autoscaler_cfg: AutoscalerConfig
    ) -> "Pool":
        nodes = {
            node.node_id: Node(NodeSpec(node.node_id, node.speed_factor, node.max_instances, node.cores))
            for node in pool_cfg.nodes
        }
        return cls(
            site=site,
            nodes=nodes,
            queue_cap=cluster_cfg.queue_cap,
            cold_start_delay=pool_cfg.cold_start_s,
            default_concurrency=cluster_cfg.concurrency_limit,
            max_per_function=autoscaler_cfg.max_instances_per_function,
        )

    @property
    def total_cores(self) -> int:
        return sum(node.spec.cores for node in self.nodes.values())

    def function_instances(self, function_id: str) -> List[FunctionInstance]:
        return [inst for inst in self.instances.values() if inst.function_id == function_id]

    def held(self) -> int:
        """Requests admitted or queued anywhere in the pool."""
        return sum(inst.load for inst in self.instances.values())


def service_time(profile, speed_factor: float) -> float:
    """Compute time scaled by node speed plus unscaled I/O time."""
    if speed_factor <= 0:
        raise ContractViolation(f"speed_factor must be positive, got {speed_factor}")
    return profile.compute_s / speed_factor + profile.io_s


def _tracker(pool: Pool, function_id: str, now: float) -> LoadTracker:
    tracker = pool.trackers.get(function_id)
    if tracker is None:
        tracker = LoadTracker(last_change=now)
        tracker.checkpoints.append((now, 0.0))
        pool.trackers[function_id] = tracker
    return tracker


def _place(pool: Pool, function_id: str) -> Optional[Node]:
    """Node with the fewest instances of the function, then fewest overall, then fastest."""
    counts: Dict[str, int] = {}
    for inst in pool.instances.values():
        if inst.function_id == function_id:
            counts[inst.node_id] = counts.get(inst.node_id, 0) + 1
    candidates = [
        (counts.get(node_id, 0), node.instance_count, -node.spec.speed_factor, position, node)
        for position, (node_id, node) in enumerate(pool.nodes.items())
        if node.instance_count < node.spec.max_instances
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda c: c[:4])[4]


def create_instance(pool: Pool, function_id: str, now: float) -> Optional[FunctionInstance]:
    """
    Start a cold instance of a function.

    Args:
        pool: Target pool
        function_id: Function to host
        now: Current time; the instance is ready at now + cold_start_delay

    Returns:
        The new instance, or None when the pool has no room for it
    """
    if len(pool.function_instances(function_id)) >= pool.max_per_function:
        return None
    node = _place(pool, function_id)
    if node is None:
        return None
    pool.created += 1
    instance = FunctionInstance(
        instance_id=f"{pool.site.value}-{function_id}-{pool.created}",
        function_id=function_id,
        node_id=node.spec.node_id,
        concurrency_limit=pool.concurrency_limits.get(function_id, pool.default_concurrency),
        memory_mb=pool.memory_mb.get(function_id, 0.0),
        cold_until=now + pool.cold_start_delay,
        order=pool.created,
    )
    node.instance_count += 1
    pool.instances[instance.instance_id] = instance
    logger.debug(f"{pool.site.value}: created {instance.instance_id} on {node.spec.node_id}")
    return instance


def remove_instance(pool: Pool, instance_id: str) -> None:
    instance = pool.instances.pop(instance_id)
    if instance.load or instance.is_cold:
        raise InvariantViolation(f"removing busy or cold instance {instance_id}")
    pool.nodes[instance.node_id].instance_count -= 1
    logger.debug(f"{pool.site.value}: removed {instance_id}")


def _start_waiting(pool: Pool, node: Node, now: float) -> List[Started]:
    started = []
    while node.run_queue and node.busy_cores < node.spec.cores:
        request, instance_id = node.run_queue.popleft()
        node.busy_cores += 1
        compute = request.profile.compute_s / node.spec.speed_factor
        finish = now + compute + request.profile.io_s
        if compute > 0:
            pool.compute_starts.append(now)
            pool.compute_ends.append(now + compute)
            pool.longest_compute = max(pool.longest_compute, compute)
        started.append(Started(request, instance_id, now, finish))
    return started


def _admit(pool: Pool, instance: FunctionInstance, request: Request) -> None:
    instance.in_flight += 1
    instance.idle_since = None
    if instance.in_flight > instance.concurrency_limit:
        raise InvariantViolation(
            f"{instance.instance_id}: in_flight {instance.in_flight} above limit {instance.concurrency_limit}"
        )
    pool.nodes[instance.node_id].run_queue.append((request, instance.instance_id))


def dispatch(pool: Pool, request: Request, now: float) -> DispatchResult:
    """
    Hand a request to the pool.

    Args:
        pool: Target pool
        request: Routed request
        now: Current time

    Returns:
        DispatchResult: assigned to the least-loaded ready instance, queued on
        the least-loaded instance, or failed when that queue is at queue_cap
        (or no instance can be created)
    """
    function_id = request.function_id
    candidates = pool.function_instances(function_id)

    if not candidates:
        instance = create_instance(pool, function_id, now)
        if instance is None:
            return DispatchResult(DispatchOutcome.FAILED)
        instance.queue.append(request)
        _tracker(pool, function_id, now).change(now, 1)
        return DispatchResult(DispatchOutcome.QUEUED, instance.instance_id, new_instances=[instance])

    ready = [
        inst for inst in candidates
        if not inst.is_cold and inst.in_flight < inst.concurrency_limit
    ]
    if ready:
        instance = min(ready, key=lambda inst: (inst.in_flight, inst.order))
        _admit(pool, instance, request)
        _tracker(pool, function_id, now).change(now, 1)
        started = _start_waiting(pool, pool.nodes[instance.node_id], now)
        return DispatchResult(DispatchOutcome.ASSIGNED, instance.instance_id, started=started)

    instance = min(candidates, key=lambda inst: (inst.load, inst.order))
    if len(instance.queue) >= pool.queue_cap:
        logger.trace(f"{pool.site.value}: queue of {instance.instance_id} full, request {request.id} failed")
        return DispatchResult(DispatchOutcome.FAILED, instance.instance_id)
    instance.queue.append(request)
    _tracker(pool, function_id, now).change(now, 1)
    return DispatchResult(DispatchOutcome.QUEUED, instance.instance_id)


def _pull_queue(pool: Pool, instance: FunctionInstance, now: float) -> None:
    while instance.queue and not instance.is_cold and instance.in_flight < instance.concurrency_limit:
        _admit(pool, instance, instance.queue.popleft())
    if instance.load == 0 and not instance.is_cold:
        instance.idle_since = now


def complete(pool: Pool, instance_id: str, request: Request, now: float) -> List[Started]:
    """
    Release the core and concurrency slot of a finished request.

    Args:
        pool: Pool that ran the request
        instance_id: Instance that admitted it
        request: Finished request
        now: Completion time

    Returns:
        Requests that started on the freed core(s)
    """
    instance = pool.instances.get(instance_id)
    if instance is None or instance.in_flight <= 0:
        raise InvariantViolation(f"completion of request {request.id} on unknown or idle {instance_id}")
    node = pool.nodes[instance.node_id]
    node.busy_cores -= 1
    instance.in_flight -= 1
    _tracker(pool, instance.function_id, now).change(now, -1)
    _pull_queue(pool, instance, now)
    return _start_waiting(pool, node, now)


def instance_ready(pool: Pool, instance_id: str, now: float) -> List[Started]:
    """Finish a cold start and admit queued requests."""
    instance = pool.instances[instance_id]
    instance.cold_until = None
    _pull_queue(pool, instance, now)
    return _start_waiting(pool, pool.nodes[instance.node_id], now)


def account_resources(pool: Pool, t0: float, t1: float) -> ResourceSample:
    """
    Resource usage over [t0, t1).

    Args:
        pool: Pool to measure
        t0: Interval start
        t1: Interval end

    Returns:
        CPU utilization (compute core-seconds over cores x interval) and the
        current memory, instance and request counts
    """
    if t1 <= t0:
        raise ContractViolation(f"empty interval [{t0}, {t1})")
    busy = 0.0
    first = bisect.bisect_left(pool.compute_starts, t0 - pool.longest_compute)
    for start, end in zip(pool.compute_starts[first:], pool.compute_ends[first:]):
        if start >= t1:
            break
        busy += max(0.0, min(end, t1) - max(start, t0))
    cores = pool.total_cores
    return ResourceSample(
        cpu_util=busy / (cores * (t1 - t0)) if cores else 0.0,
        memory_mb=sum(inst.memory_mb for inst in pool.instances.values()),
        instances=len(pool.instances),
        in_flight=sum(inst.in_flight for inst in pool.instances.values()),
        queued=sum(len(inst.queue) for inst in pool.instances.values()),
    )


def check_invariants(pool: Pool) -> None:
    """Raise InvariantViolation when per-instance or per-node limits are broken."""
    for inst in pool.instances.values():
        if inst.in_flight > inst.concurrency_limit:
            raise InvariantViolation(f"{inst.instance_id}: in_flight above concurrency limit")
        if inst.is_cold and inst.in_flight:
            raise InvariantViolation(f"{inst.instance_id}: cold instance with work in flight")
        if inst.queue and not inst.is_cold and inst.in_flight < inst.concurrency_limit:
            raise InvariantViolation(f"{inst.instance_id}: queued work behind free slots")
    for node in pool.nodes.values():
        if node.busy_cores > node.spec.cores or node.busy_cores < 0:
            raise InvariantViolation(f"{node.spec.node_id}: {node.busy_cores} busy cores")


def drain_pool(pool: Pool) -> int:
    """Count and clear every request still held by the pool."""
    leftover = pool.held()
    for inst in pool.instances.values():
        inst.queue.clear()
        inst.in_flight = 0
    for node in pool.nodes.values():
        node.run_queue.clear()
        node.busy_cores = 0
    return leftover


def mean_concurrency(pool: Pool, function_id: str, now: float, window: float) -> float:
    """Time-weighted mean concurrency of a function over the last `window` seconds."""
    tracker = pool.trackers.get(function_id)
    if tracker is None:
        return 0.0
    horizon = now - window
    ref_time, ref_value = tracker.checkpoints[0]
    for checkpoint_time, value in tracker.checkpoints:
        if checkpoint_time > horizon:
            break
        ref_time, ref_value = checkpoint_time, value
    span = now - ref_time
    if span <= 0:
        return float(tracker.level)
    return (tracker.cumulative(now) - ref_value) / span


def checkpoint(pool: Pool, now: float, window: float) -> None:
    """Store the cumulative concurrency of every function at `now`."""
    for tracker in pool.trackers.values():
        tracker.checkpoints.append((now, tracker.cumulative(now)))
        while len(tracker.checkpoints) > 1 and tracker.checkpoints[1][0] <= now - window:
            tracker.checkpoints.popleft()


def desired_instances(mean: float, target_concurrency: int, max_instances: int) -> int:
    return min(max(math.ceil(mean / target_concurrency - 1e-9), 0), max_instances)


def prune_history(pool: Pool, horizon: float) -> int:
    """Forget compute intervals that ended before `horizon`; returns how many."""
    cut = bisect.bisect_left(pool.compute_starts, horizon - pool.longest_compute)
    del pool.compute_starts[:cut]
    del pool.compute_ends[:cut]
    return cut
