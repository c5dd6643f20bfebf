"""Tests for gateway routing."""

import pytest

from gateway.router import GatewayState, Request, forget, observe_response, route, route_request
from utils.errors import ContractViolation, InvariantViolation
from utils.rng import ROUTING, make_stream
from utils.sites import Site
from workload.profiles import WorkloadProfile

IO = WorkloadProfile(name="io", io_s=0.1, request_bytes=100, response_bytes=100)


def request(request_id=1, arrival=10.0):
    return Request(
        id=request_id,
        function_id="io",
        arrival_time=arrival,
        profile=IO,
        request_bytes=IO.request_bytes,
        response_bytes=IO.response_bytes,
    )


def cloud_fraction(pct, draws=100_000, seed=7):
    rng = make_stream(seed, ROUTING)
    req = request()
    hits = sum(route(req, pct, rng).target == Site.CLOUD for _ in range(draws))
    return hits / draws


def test_zero_pct_always_edge():
    assert cloud_fraction(0.0, draws=20_000) == 0.0


def test_full_pct_always_cloud():
    assert cloud_fraction(100.0, draws=20_000) == 1.0


@pytest.mark.parametrize("pct", [25.0, 50.0, 75.0])
def test_fraction_within_one_point(pct):
    assert abs(cloud_fraction(pct) * 100 - pct) <= 1.0


def test_decision_records_percentage(rng):
    decision = route(request(), 40.0, rng)
    assert decision.traffic_pct_at_decision == 40.0


def test_same_seed_same_decisions():
    rng_a = make_stream(3, ROUTING)
    rng_b = make_stream(3, ROUTING)
    a = [route(request(), 50.0, rng_a).target for _ in range(500)]
    b = [route(request(), 50.0, rng_b).target for _ in range(500)]
    assert a == b


def test_one_draw_per_decision():
    rng = make_stream(9, ROUTING)
    route(request(), 0.0, rng)
    route(request(), 100.0, rng)
    reference = make_stream(9, ROUTING)
    reference.random(2)
    assert rng.random() == reference.random()


@pytest.mark.parametrize("pct", [-0.1, 100.1])
def test_rejects_invalid_percentage(pct, rng):
    with pytest.raises(ContractViolation):
        route(request(), pct, rng)


def test_negative_payload_rejected():
    with pytest.raises(ContractViolation):
        Request(id=1, function_id="io", arrival_time=0.0, profile=IO, request_bytes=-1, response_bytes=0)


class TestObserveResponse:
    def test_latency_is_difference(self, rng):
        state = GatewayState(rng=rng)
        req = request(arrival=10.0)
        decision = route_request(state, req, 100.0)
        sample = observe_response(state, req, 10.5)
        assert sample.latency == pytest.approx(0.5)
        assert sample.served_at == decision.target == Site.CLOUD
        assert sample.timestamp == 10.5
        assert state.routed[Site.CLOUD] == 1

    def test_zero_latency_accepted(self, rng):
        state = GatewayState(rng=rng)
        req = request(arrival=10.0)
        route_request(state, req, 0.0)
        assert observe_response(state, req, 10.0).latency == 0.0

    def test_completion_before_arrival_is_a_bug(self, rng):
        state = GatewayState(rng=rng)
        req = request(arrival=10.0)
        route_request(state, req, 0.0)
        with pytest.raises(InvariantViolation):
            observe_response(state, req, 9.0)

    def test_unrouted_response_is_a_bug(self, rng):
        with pytest.raises(InvariantViolation):
            observe_response(GatewayState(rng=rng), request(), 11.0)

    def test_batch_conserves_count(self, rng):
        state = GatewayState(rng=rng)
        requests = [request(i, arrival=float(i)) for i in range(250)]
        for req in requests:
            route_request(state, req, 30.0)
        samples = [observe_response(state, req, req.arrival_time + 0.2) for req in requests]
        assert len(samples) == state.observed == 250
        assert sum(state.routed.values()) == 250
        assert not state.decisions

    def test_forget(self, rng):
        state = GatewayState(rng=rng)
        req = request()
        route_request(state, req, 0.0)
        assert forget(state, req) is not None
        assert forget(state, req) is None
