"""
Discrete-event simulation of one experiment cell.

Requests arrive at the edge gateway, are routed to the edge pool or offloaded
over the link to the cloud pool, and their end-to-end latencies feed the
latency window that drives the offloading controller. Autoscaler, controller
and metrics ticks run at fixed multiples of their intervals. Service
definitions are replicated from the cloud store to the edge store before the
first arrival, and the edge publishes instance counts back as status.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from cluster.autoscaler import autoscale_step
from cluster.pool import (
    DispatchOutcome,
    Pool,
    Started,
    account_resources,
    check_invariants,
    complete,
    dispatch,
    drain_pool,
    instance_ready,
    prune_history,
)
from config import AUTO_SPLIT, BASE_PROFILE_NAMES, GatewayConfig, SimulationConfig, config_snapshot, normalize_split
from gateway.router import GatewayState, Request, forget, observe_response, route_request
from metrics.window import LatencyWindow, nearest_rank, record
from network.link import (
    Direction,
    LinkSpec,
    LinkState,
    prune_ledger,
    throughput_between,
    transfer_time,
    utilization_between,
)
from offload.controller import build_strategy
from replication.replicator import Replicator
from replication.specs import ServiceSpec, default_services, load_manifest
from replication.store import ResourceStore
from simulation.events import EventKind, EventQueue, SimEvent
from utils.errors import InvariantViolation
from utils.logger import get_logger
from utils.rng import ARRIVALS, MIX, ROUTING, make_stream
from utils.sites import Site
from workload.arrivals import RampSchedule, next_arrival
from workload.profiles import build_profiles, functions_for, make_request

logger = get_logger(__name__)

SeriesRow = Tuple[float, str, float]


@dataclass
class RunResult:
    """Outcome of one simulation run."""
    workload: str
    split: str
    seed: int
    repetition: int = 0
    generated: int = 0
    successful: int = 0
    failed: int = 0
    overflowed: int = 0
    abandoned: int = 0
    deadline_missed: int = 0
    routed_edge: int = 0
    routed_cloud: int = 0
    mean_latency_s: float = 0.0
    p95_latency_s: float = 0.0
    final_instances: Dict[str, int] = field(default_factory=dict)
    replication_applies: int = 0
    events_processed: int = 0
    series: List[SeriesRow] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    def summary(self) -> Dict[str, Any]:
        """Scalar fields only (no series, no config)."""
        return {
            "workload": self.workload,
            "split": self.split,
            "seed": self.seed,
            "repetition": self.repetition,
            "generated": self.generated,
            "successful": self.successful,
            "failed": self.failed,
            "overflowed": self.overflowed,
            "abandoned": self.abandoned,
            "deadline_missed": self.deadline_missed,
            "routed_edge": self.routed_edge,
            "routed_cloud": self.routed_cloud,
            "mean_latency_s": self.mean_latency_s,
            "p95_latency_s": self.p95_latency_s,
            "final_instances": dict(self.final_instances),
            "replication_applies": self.replication_applies,
            "events_processed": self.events_processed,
        }


def split_label(gateway: GatewayConfig) -> str:
    return AUTO_SPLIT if gateway.mode == "auto" else normalize_split(gateway.fixed_pct)


def build_services(config: SimulationConfig) -> List[ServiceSpec]:
    """Service definitions from the manifest, or one per base profile."""
    if config.replication.manifest:
        return load_manifest(
            config.replication.manifest,
            config.replication.image_registry,
            config.cluster.concurrency_limit,
        )
    return default_services(
        BASE_PROFILE_NAMES, config.cluster.concurrency_limit, config.replication.image_registry
    )


class Simulation:
    """State and event handlers of one run."""

    def __init__(self, config: SimulationConfig, seed: Optional[int] = None):
        self.config = config
        self.seed = config.run.seed if seed is None else seed
        self.result = RunResult(
            workload=config.workload.name,
            split=split_label(config.gateway),
            seed=self.seed,
            config=config_snapshot(config),
        )

        self.profiles = build_profiles(config.workload)
        self.workload = self.profiles[config.workload.name]
        self.schedule = RampSchedule.from_config(config.workload)
        self.end_time = self.schedule.end + config.run.drain_s

        routing_seed = config.gateway.rng_seed if config.gateway.rng_seed is not None else self.seed
        self.arrival_rng = make_stream(self.seed, ARRIVALS)
        self.mix_rng = make_stream(self.seed, MIX)
        self.gateway = GatewayState(rng=make_stream(routing_seed, ROUTING))

        self.window = LatencyWindow(config.metrics.window_s, config.metrics.min_samples)
        self.strategy = build_strategy(config.gateway, config.offload)
        self.offload = self.strategy.initial_state()
        self.link = LinkState.idle(LinkSpec.from_config(config.network))

        self.cloud_store = ResourceStore(Site.CLOUD)
        self.edge_store = ResourceStore(Site.EDGE)
        self.replicator = Replicator(self.cloud_store, self.edge_store)

        self.edge = Pool.from_config(Site.EDGE, config.cluster.edge, config.cluster, config.autoscaler)
        self.cloud = Pool.from_config(Site.CLOUD, config.cluster.cloud, config.cluster, config.autoscaler)
        self.pools = {Site.EDGE: self.edge, Site.CLOUD: self.cloud}
        memory = {name: profile.memory_mb for name, profile in self.profiles.items()}
        for pool in self.pools.values():
            pool.memory_mb.update(memory)
        self.edge_services: Dict[str, str] = {}

        self.events = EventQueue()
        self.outstanding: Dict[int, Request] = {}
        self.in_transit = 0
        self.latencies: List[float] = []
        self.arrivals_since_tick = 0

    def _emit(self, t: float, metric: str, value: float) -> None:
        self.result.series.append((t, metric, float(value)))

    def _replicate(self) -> None:
        for spec in build_services(self.config):
            self.cloud_store.apply(spec)
        self.replicator.attach()
        self.replicator.resync()
        for spec in self.cloud_store.list():
            if spec.concurrency_limit is not None:
                self.cloud.concurrency_limits[spec.function_id] = spec.concurrency_limit
        for spec in self.edge_store.list():
            if spec.concurrency_limit is not None:
                self.edge.concurrency_limits[spec.function_id] = spec.concurrency_limit
            self.edge_services[spec.function_id] = spec.name
        logger.debug(
            f"Replicated {len(self.edge_services)} services to edge "
            f"({self.replicator.applies} applies)"
        )
        missing = self.unreplicated_functions()
        if missing:
            logger.warning(
                f"No replicated service for {missing}; the edge runs them with the default concurrency limit"
            )

    def unreplicated_functions(self) -> List[str]:
        """Functions the workload emits that have no edge service definition."""
        return [
            profile.name for profile in functions_for(self.workload)
            if profile.name not in self.edge_services
        ]

    def _schedule_ticks(self) -> None:
        self._schedule_tick(EventKind.CONTROL_TICK, 1)
        self._schedule_tick(EventKind.AUTOSCALE_TICK, 1)
        self._schedule_tick(EventKind.METRICS_TICK, 1)

    def _tick_interval(self, kind: EventKind) -> float:
        if kind == EventKind.CONTROL_TICK:
            return self.config.offload.control_interval_s
        if kind == EventKind.AUTOSCALE_TICK:
            return self.config.autoscaler.tick_s
        return self.config.metrics.scrape_interval_s

    def _schedule_tick(self, kind: EventKind, k: int) -> None:
        t = k * self._tick_interval(kind)
        if t <= self.end_time:
            self.events.schedule(t, kind, k)

    def _schedule_arrival(self, now: float) -> None:
        t = next_arrival(self.schedule, now, self.arrival_rng)
        if t is not None and t <= self.end_time:
            self.events.schedule(t, EventKind.ARRIVAL)

    def _start(self, pool: Pool, started: List[Started]) -> None:
        for item in started:
            self.events.schedule(
                item.finish_time, EventKind.DISPATCH_COMPLETE, (pool.site, item.instance_id, item.request)
            )

    def _dispatch(self, pool: Pool, request: Request, now: float) -> None:
        result = dispatch(pool, request, now)
        if result.outcome == DispatchOutcome.FAILED:
            self._fail(request)
            return
        for instance in result.new_instances:
            self.events.schedule(instance.cold_until, EventKind.INSTANCE_READY, (pool.site, instance.instance_id))
        self._start(pool, result.started)

    def _fail(self, request: Request) -> None:
        forget(self.gateway, request)
        del self.outstanding[request.id]
        self.result.failed += 1
        self.result.overflowed += 1

    def _respond(self, request: Request, now: float) -> None:
        sample = observe_response(self.gateway, request, now)
        del self.outstanding[request.id]
        record(self.window, sample)
        self._emit(now, f"{sample.served_at.value}_latency_s", sample.latency)
        deadline = self.config.run.deadline_s
        if deadline is not None and sample.latency > deadline:
            self.result.failed += 1
            self.result.deadline_missed += 1
            return
        self.result.successful += 1
        self.latencies.append(sample.latency)

    def _on_arrival(self, now: float) -> None:
        request = make_request(self.workload, self.mix_rng, self.result.generated, now)
        self.result.generated += 1
        self.arrivals_since_tick += 1
        self.outstanding[request.id] = request
        decision = route_request(self.gateway, request, self.offload.traffic_pct)
        if decision.target == Site.EDGE:
            self.result.routed_edge += 1
            self._dispatch(self.edge, request, now)
        else:
            self.result.routed_cloud += 1
            self.in_transit += 1
            uploaded = transfer_time(self.link, request.request_bytes, now, Direction.UP)
            self.events.schedule(
                uploaded + self.link.spec.rtt / 2.0, EventKind.TRANSFER_COMPLETE, (Direction.UP, request)
            )
        self._schedule_arrival(now)

    def _on_dispatch_complete(self, now: float, payload: Tuple[Site, str, Request]) -> None:
        site, instance_id, request = payload
        pool = self.pools[site]
        self._start(pool, complete(pool, instance_id, request, now))
        if site == Site.EDGE:
            self._respond(request, now)
            return
        self.in_transit += 1
        downloaded = transfer_time(self.link, request.response_bytes, now, Direction.DOWN)
        self.events.schedule(
            downloaded + self.link.spec.rtt / 2.0, EventKind.TRANSFER_COMPLETE, (Direction.DOWN, request)
        )

    def _on_transfer_complete(self, now: float, payload: Tuple[Direction, Request]) -> None:
        direction, request = payload
        self.in_transit -= 1
        if direction == Direction.UP:
            self._dispatch(self.cloud, request, now)
        else:
            self._respond(request, now)

    def _on_instance_ready(self, now: float, payload: Tuple[Site, str]) -> None:
        site, instance_id = payload
        pool = self.pools[site]
        if instance_id in pool.instances:
            self._start(pool, instance_ready(pool, instance_id, now))

    def _on_autoscale(self, now: float, k: int) -> None:
        for pool in self.pools.values():
            scaled = autoscale_step(pool, now, self.config.autoscaler)
            for instance in scaled.created:
                self.events.schedule(instance.cold_until, EventKind.INSTANCE_READY, (pool.site, instance.instance_id))
        self._publish_edge_status()
        self._schedule_tick(EventKind.AUTOSCALE_TICK, k + 1)

    def _publish_edge_status(self) -> None:
        ready: Dict[str, int] = {function_id: 0 for function_id in self.edge_services}
        for instance in self.edge.instances.values():
            if not instance.is_cold and instance.function_id in ready:
                ready[instance.function_id] += 1
        for function_id, count in ready.items():
            self.edge_store.update_status(self.edge_services[function_id], {"ready_instances": count})
        self.replicator.drain()

    def _on_control(self, now: float, k: int) -> None:
        self.offload = self.strategy.step(self.offload, self.window, now)
        self._emit(now, "latency_ratio", self.offload.last_ratio)
        self._emit(now, "smoothed_ratio", self.offload.last_smoothed)
        self._emit(now, "target_pct", self.offload.last_target)
        self._emit(now, "traffic_pct", self.offload.traffic_pct)
        self._schedule_tick(EventKind.CONTROL_TICK, k + 1)

    def _on_metrics(self, now: float, k: int) -> None:
        interval = self.config.metrics.scrape_interval_s
        t0 = now - interval
        for site, pool in self.pools.items():
            sample = account_resources(pool, t0, now)
            self._emit(now, f"{site.value}_cpu_util", sample.cpu_util)
            self._emit(now, f"{site.value}_memory_mb", sample.memory_mb)
            self._emit(now, f"{site.value}_instances", sample.instances)
            self._emit(now, f"{site.value}_queued", sample.queued)
        self._emit(now, "link_throughput_Bps", throughput_between(self.link, t0, now))
        self._emit(now, "link_utilization", utilization_between(self.link, t0, now))
        self._emit(now, "arrival_rate", self.arrivals_since_tick / interval)
        self.arrivals_since_tick = 0
        self.check_conservation()
        for pool in self.pools.values():
            check_invariants(pool)
            prune_history(pool, t0)
        prune_ledger(self.link, t0)
        self._schedule_tick(EventKind.METRICS_TICK, k + 1)

    def check_conservation(self) -> None:
        """generated = successful + failed + held by pools + in transit."""
        held = self.edge.held() + self.cloud.held()
        resolved = self.result.successful + self.result.failed
        if self.result.generated != resolved + held + self.in_transit:
            raise InvariantViolation(
                f"conservation broken: generated={self.result.generated} resolved={resolved} "
                f"held={held} in_transit={self.in_transit}",
                list(self.events.trace),
            )

    def _handle(self, event: SimEvent) -> None:
        now = event.time
        if event.kind == EventKind.ARRIVAL:
            self._on_arrival(now)
        elif event.kind == EventKind.DISPATCH_COMPLETE:
            self._on_dispatch_complete(now, event.payload)
        elif event.kind == EventKind.TRANSFER_COMPLETE:
            self._on_transfer_complete(now, event.payload)
        elif event.kind == EventKind.INSTANCE_READY:
            self._on_instance_ready(now, event.payload)
        elif event.kind == EventKind.AUTOSCALE_TICK:
            self._on_autoscale(now, event.payload)
        elif event.kind == EventKind.CONTROL_TICK:
            self._on_control(now, event.payload)
        elif event.kind == EventKind.METRICS_TICK:
            self._on_metrics(now, event.payload)

    def _finish(self) -> RunResult:
        result = self.result
        for request in self.outstanding.values():
            forget(self.gateway, request)
        result.abandoned = len(self.outstanding)
        result.failed += result.abandoned
        self.outstanding.clear()
        for pool in self.pools.values():
            drain_pool(pool)
        self.in_transit = 0
        if result.generated != result.successful + result.failed:
            raise InvariantViolation(
                f"end of run: generated={result.generated} successful={result.successful} failed={result.failed}",
                list(self.events.trace),
            )
        if self.latencies:
            values = np.asarray(self.latencies, dtype=float)
            result.mean_latency_s = float(values.mean())
            result.p95_latency_s = nearest_rank(values, 95)
        result.final_instances = {site.value: len(pool.instances) for site, pool in self.pools.items()}
        result.replication_applies = self.replicator.applies
        result.events_processed = self.events.processed
        return result

    def run(self) -> RunResult:
        """Execute events until the schedule end plus the drain period."""
        self._replicate()
        self._schedule_ticks()
        self._schedule_arrival(0.0)
        try:
            while True:
                next_time = self.events.peek_time()
                if next_time is None or next_time > self.end_time:
                    break
                self._handle(self.events.pop())
        except InvariantViolation as exc:
            if not exc.trace_tail:
                exc.trace_tail = list(self.events.trace)
            logger.error(f"Run {self.result.workload}/{self.result.split} aborted: {exc}")
            raise
        return self._finish()


def run(config: SimulationConfig, seed: Optional[int] = None) -> RunResult:
    """
    Simulate one (workload, split, seed) cell.

    Args:
        config: Validated simulation config
        seed: Overrides config.run.seed when given

    Returns:
        RunResult; identical inputs give identical results
    """
    simulation = Simulation(config, seed)
    logger.info(
        f"Running {simulation.result.workload} at split {simulation.result.split} "
        f"(seed {simulation.seed}, until t={simulation.end_time:.0f}s)"
    )
    result = simulation.run()
    logger.info(
        f"Finished {result.workload}/{result.split}: generated={result.generated} "
        f"successful={result.successful} failed={result.failed} "
        f"mean={result.mean_latency_s:.3f}s p95={result.p95_latency_s:.3f}s"
    )
    return result
