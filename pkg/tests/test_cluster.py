"""Tests for pools, dispatch and the autoscaler."""

import pytest

from cluster.autoscaler import autoscale_step, instance_counts
from cluster.pool import (
    DispatchOutcome,
    LoadTracker,
    Node,
    NodeSpec,
    Pool,
    account_resources,
    check_invariants,
    complete,
    create_instance,
    desired_instances,
    dispatch,
    drain_pool,
    instance_ready,
    mean_concurrency,
    prune_history,
    service_time,
)
from config import AutoscalerConfig, ClusterConfig, PoolConfig
from gateway.router import Request
from utils.errors import ContractViolation, InvariantViolation
from utils.sites import Site
from workload.profiles import WorkloadProfile

WORK = WorkloadProfile(name="work", compute_s=1.0)


def make_pool(nodes=(("n1", 1.0, 3, 1),), cold_start=0.0, limit=4, queue_cap=10, max_per_function=5):
    return Pool(
        site=Site.EDGE,
        nodes={node_id: Node(NodeSpec(node_id, speed, max_inst, cores)) for node_id, speed, max_inst, cores in nodes},
        queue_cap=queue_cap,
        cold_start_delay=cold_start,
        default_concurrency=limit,
        max_per_function=max_per_function,
    )


def make_request(request_id, profile=WORK, arrival=0.0):
    return Request(
        id=request_id,
        function_id=profile.name,
        arrival_time=arrival,
        profile=profile,
        request_bytes=0,
        response_bytes=0,
    )


def warm_instance(pool, function_id="work", now=0.0):
    instance = create_instance(pool, function_id, now)
    instance_ready(pool, instance.instance_id, now)
    return instance


class TestServiceTime:
    def test_reference_speed(self):
        assert service_time(WorkloadProfile(name="f", compute_s=0.2), 1.0) == pytest.approx(0.2)

    def test_cloud_speed(self):
        assert service_time(WorkloadProfile(name="f", compute_s=0.2), 4.0) == pytest.approx(0.05)

    def test_io_not_scaled(self):
        assert service_time(WorkloadProfile(name="f", compute_s=0.2, io_s=0.3), 2.0) == pytest.approx(0.4)

    def test_invalid_speed(self):
        with pytest.raises(ContractViolation):
            service_time(WORK, 0.0)


class TestDispatch:
    def test_idle_instance_takes_request(self):
        pool = make_pool()
        instance = warm_instance(pool)
        result = dispatch(pool, make_request(1), 0.0)
        assert result.outcome == DispatchOutcome.ASSIGNED
        assert instance.in_flight == 1
        assert result.started[0].finish_time == pytest.approx(1.0)

    def test_scale_from_zero(self):
        pool = make_pool(cold_start=2.0)
        result = dispatch(pool, make_request(1), 5.0)
        assert result.outcome == DispatchOutcome.QUEUED
        (instance,) = result.new_instances
        assert instance.cold_until == 7.0
        assert len(instance.queue) == 1
        assert instance.in_flight == 0

    def test_cold_start_delays_service(self):
        pool = make_pool(cold_start=2.0)
        result = dispatch(pool, make_request(1), 0.0)
        (started,) = instance_ready(pool, result.instance_id, 2.0)
        assert started.start_time == 2.0
        assert started.finish_time == pytest.approx(3.0)

    def test_least_loaded_instance(self):
        pool = make_pool(nodes=(("n1", 1.0, 3, 8), ("n2", 1.0, 3, 8)))
        saturated = warm_instance(pool)
        spare = warm_instance(pool)
        saturated.in_flight = 4
        spare.in_flight = 2
        result = dispatch(pool, make_request(1), 0.0)
        assert result.instance_id == spare.instance_id
        assert spare.in_flight == 3

    def test_queue_then_overflow(self):
        pool = make_pool(limit=1, queue_cap=2)
        instance = warm_instance(pool)
        outcomes = [dispatch(pool, make_request(i), 0.0).outcome for i in range(4)]
        assert outcomes == [
            DispatchOutcome.ASSIGNED,
            DispatchOutcome.QUEUED,
            DispatchOutcome.QUEUED,
            DispatchOutcome.FAILED,
        ]
        assert instance.in_flight == 1
        assert len(instance.queue) == 2

    def test_no_capacity_fails(self):
        pool = make_pool(nodes=(("n1", 1.0, 0, 1),))
        assert dispatch(pool, make_request(1), 0.0).outcome == DispatchOutcome.FAILED

    def test_queue_is_fifo(self):
        pool = make_pool(limit=1)
        instance = warm_instance(pool)
        for i in range(3):
            dispatch(pool, make_request(i), 0.0)
        finished = []
        now = 1.0
        for _ in range(3):
            request = instance.queue[0] if instance.queue else None
            started = complete(pool, instance.instance_id, make_request(-1), now)
            if started:
                finished.append(started[0].request.id)
                assert request is not None and started[0].request.id == request.id
            now += 1.0
        assert finished == [1, 2]

    def test_core_run_queue(self):
        pool = make_pool(limit=4)
        instance = warm_instance(pool)
        first = dispatch(pool, make_request(1), 0.0)
        second = dispatch(pool, make_request(2), 0.0)
        assert len(first.started) == 1
        assert second.outcome == DispatchOutcome.ASSIGNED
        assert second.started == []
        (started,) = complete(pool, instance.instance_id, make_request(1), 1.0)
        assert started.request.id == 2
        assert started.finish_time == pytest.approx(2.0)
        check_invariants(pool)

    def test_placement_spreads_instances(self):
        pool = make_pool(nodes=(("slow", 1.0, 3, 1), ("fast", 2.0, 3, 2)))
        first = create_instance(pool, "work", 0.0)
        second = create_instance(pool, "work", 0.0)
        assert first.node_id == "fast"
        assert second.node_id == "slow"

    def test_per_function_cap(self):
        pool = make_pool(nodes=(("n1", 1.0, 10, 1),), max_per_function=2)
        assert create_instance(pool, "work", 0.0) is not None
        assert create_instance(pool, "work", 0.0) is not None
        assert create_instance(pool, "work", 0.0) is None
        assert create_instance(pool, "other", 0.0) is not None

    def test_completion_on_idle_instance_is_a_bug(self):
        pool = make_pool()
        instance = warm_instance(pool)
        with pytest.raises(InvariantViolation):
            complete(pool, instance.instance_id, make_request(1), 1.0)


def test_from_config():
    pool = Pool.from_config(Site.EDGE, ClusterConfig().edge, ClusterConfig(), AutoscalerConfig())
    assert pool.total_cores == 6
    assert pool.cold_start_delay == 2.0
    assert pool.queue_cap == 10
    assert pool.default_concurrency == 4
    cloud = Pool.from_config(Site.CLOUD, PoolConfig(nodes="vm:4:64:64", cold_start_s=1), ClusterConfig(), AutoscalerConfig())
    assert cloud.nodes["vm"].spec.speed_factor == 4.0


class TestAccounting:
    def test_idle_pool(self):
        sample = account_resources(make_pool(), 0.0, 1.0)
        assert sample.cpu_util == 0.0
        assert sample.instances == 0

    def test_fully_busy(self):
        pool = make_pool()
        warm_instance(pool)
        dispatch(pool, make_request(1), 0.0)
        assert account_resources(pool, 0.0, 1.0).cpu_util == pytest.approx(1.0)

    def test_half_busy(self):
        pool = make_pool()
        warm_instance(pool)
        dispatch(pool, make_request(1), 0.0)
        sample = account_resources(pool, 0.0, 2.0)
        assert sample.cpu_util == pytest.approx(0.5)
        assert sample.in_flight == 1

    def test_io_time_is_not_cpu(self):
        pool = make_pool()
        warm_instance(pool, "io")
        dispatch(pool, make_request(1, WorkloadProfile(name="io", io_s=1.0)), 0.0)
        assert account_resources(pool, 0.0, 1.0).cpu_util == 0.0

    def test_memory_of_instances(self):
        pool = make_pool()
        pool.memory_mb["work"] = 128.0
        warm_instance(pool)
        warm_instance(pool)
        assert account_resources(pool, 0.0, 1.0).memory_mb == 256.0

    def test_empty_interval(self):
        with pytest.raises(ContractViolation):
            account_resources(make_pool(), 1.0, 1.0)

    def test_pruning_keeps_overlapping_work(self):
        pool = make_pool(nodes=(("n1", 1.0, 3, 4),))
        warm_instance(pool)
        dispatch(pool, make_request(1), 0.0)
        dispatch(pool, make_request(2, WorkloadProfile(name="work", compute_s=3.0), arrival=1.0), 1.0)
        dispatch(pool, make_request(3, arrival=5.0), 5.0)
        before = account_resources(pool, 3.5, 4.5).cpu_util
        assert prune_history(pool, 3.5) == 1
        assert pool.compute_starts == [1.0, 5.0]
        assert account_resources(pool, 3.5, 4.5).cpu_util == pytest.approx(before)
        assert before == pytest.approx(0.125)


def test_drain_counts_everything_held():
    pool = make_pool(limit=1)
    warm_instance(pool)
    for i in range(3):
        dispatch(pool, make_request(i), 0.0)
    assert drain_pool(pool) == 3
    assert pool.held() == 0


class TestAutoscaler:
    def test_desired_is_ceiling(self):
        assert desired_instances(7.0, 2, 10) == 4
        assert desired_instances(6.0, 2, 10) == 3
        assert desired_instances(0.0, 2, 10) == 0
        assert desired_instances(50.0, 2, 5) == 5

    def test_mean_concurrency_is_time_weighted(self):
        pool = make_pool()
        tracker = LoadTracker(level=7, last_change=0.0)
        tracker.checkpoints.append((0.0, 0.0))
        pool.trackers["work"] = tracker
        mean = mean_concurrency(pool, "work", 10.0, 10.0)
        assert mean == pytest.approx(7.0)
        assert desired_instances(mean, 2, 10) == 4

    def test_scale_to_zero(self):
        pool = make_pool()
        cfg = AutoscalerConfig(idle_timeout_s=30, scale_window_s=10, tick_s=2)
        result = dispatch(pool, make_request(1), 0.0)
        (started,) = instance_ready(pool, result.instance_id, 0.0)
        complete(pool, result.instance_id, started.request, started.finish_time)
        counts = []
        for tick in range(1, 21):
            autoscale_step(pool, 2.0 * tick, cfg)
            counts.append(len(pool.instances))
        assert counts[0] == 1
        assert counts[-1] == 0
        assert instance_counts(pool) == {}

    def test_idle_instance_kept_while_function_busy(self):
        pool = make_pool()
        cfg = AutoscalerConfig(idle_timeout_s=4, scale_window_s=10)
        instance = warm_instance(pool)
        pool.trackers["work"] = LoadTracker(level=3, last_change=0.0)
        pool.trackers["work"].checkpoints.append((0.0, 0.0))
        instance.idle_since = 0.0
        autoscale_step(pool, 8.0, cfg)
        assert instance.instance_id in pool.instances

    def test_scale_to_zero_with_long_scale_window(self):
        pool = make_pool()
        cfg = AutoscalerConfig(idle_timeout_s=30, scale_window_s=120, tick_s=2)
        slow = WorkloadProfile(name="work", compute_s=40.0)
        result = dispatch(pool, make_request(1, profile=slow), 0.0)
        (started,) = instance_ready(pool, result.instance_id, 0.0)
        assert started.finish_time == pytest.approx(40.0)

        counts = {}
        for tick in range(1, 41):
            now = 2.0 * tick
            if now == 40.0:
                complete(pool, result.instance_id, started.request, now)
            scaled = autoscale_step(pool, now, cfg)
            counts[now] = len(pool.instances)
            if now == 70.0:
                assert desired_instances(mean_concurrency(pool, "work", now, 120.0), 3, 5) == 1
                assert scaled.desired == {"work": 0}
                assert scaled.removed == [result.instance_id]

        assert all(counts[2.0 * tick] == 1 for tick in range(1, 35))
        assert all(counts[2.0 * tick] == 0 for tick in range(35, 41))

    def test_scales_up_with_load(self):
        pool = make_pool(nodes=(("n1", 1.0, 10, 4),), limit=2, queue_cap=100)
        cfg = AutoscalerConfig(target_concurrency=2, max_instances_per_function=5)
        counts = []
        request_id = 0
        for tick in range(1, 30):
            now = 2.0 * tick
            for _ in range(tick):
                request_id += 1
                result = dispatch(pool, make_request(request_id, arrival=now), now)
                for instance in result.new_instances:
                    instance_ready(pool, instance.instance_id, now)
            scaled = autoscale_step(pool, now, cfg)
            for instance in scaled.created:
                instance_ready(pool, instance.instance_id, now)
            counts.append(len(pool.instances))
        assert counts == sorted(counts)
        assert counts[-1] == 5
