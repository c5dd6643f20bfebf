"""
Request routing at the edge gateway.

Every request gets an independent draw from the routing stream; a share of
traffic_pct percent goes to the cloud. The gateway also turns completed
requests back into latency samples.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Optional

import numpy as np

from metrics.window import LatencySample
from utils.errors import ContractViolation, InvariantViolation
from utils.logger import get_logger
from utils.sites import Site

if TYPE_CHECKING:
    from workload.profiles import WorkloadProfile

logger = get_logger(__name__)


@dataclass
class Request:
    id: int
    function_id: str
    arrival_time: float
    profile: "WorkloadProfile"
    request_bytes: int
    response_bytes: int

    def __post_init__(self):
        if self.request_bytes < 0 or self.response_bytes < 0:
            raise ContractViolation(
                f"request {self.id}: payload sizes must be non-negative "
                f"({self.request_bytes}, {self.response_bytes})"
            )


@dataclass(frozen=True)
class RouteDecision:
    target: Site
    traffic_pct_at_decision: float


@dataclass
class GatewayState:
    """Routing stream plus the decisions of requests still in the system."""
    rng: np.random.Generator
    decisions: Dict[int, RouteDecision] = field(default_factory=dict)
    routed: Dict[Site, int] = field(default_factory=lambda: {Site.EDGE: 0, Site.CLOUD: 0})
    observed: int = 0


def route(req: Request, traffic_pct: float, rng: np.random.Generator) -> RouteDecision:
    """
    Decide where a request runs.

    Args:
        req: Incoming request
        traffic_pct: Percentage of traffic sent to the cloud
        rng: Routing stream; exactly one draw per call

    Returns:
        Cloud when u < traffic_pct for u uniform in [0, 100), Edge otherwise
    """
    if not 0.0 <= traffic_pct <= 100.0:
        raise ContractViolation(f"traffic_pct must be in [0, 100], got {traffic_pct}")
    u = rng.random() * 100.0
    target = Site.CLOUD if u < traffic_pct else Site.EDGE
    return RouteDecision(target=target, traffic_pct_at_decision=traffic_pct)


def route_request(state: GatewayState, req: Request, traffic_pct: float) -> RouteDecision:
    """Route a request and remember the decision until its response is observed."""
    decision = route(req, traffic_pct, state.rng)
    state.decisions[req.id] = decision
    state.routed[decision.target] += 1
    logger.trace(f"Request {req.id} ({req.function_id}) -> {decision.target.value}")
    return decision


def forget(state: GatewayState, req: Request) -> Optional[RouteDecision]:
    """Drop the decision of a request that will never respond."""
    return state.decisions.pop(req.id, None)


def observe_response(state: GatewayState, req: Request, completion_time: float) -> LatencySample:
    """
    Turn a completed request into a latency sample.

    Args:
        state: Gateway state holding the route decision
        req: Completed request
        completion_time: Simulated time the response reached the gateway

    Returns:
        LatencySample tagged with the site that served the request

    Raises:
        InvariantViolation: If the response precedes the arrival or was never routed
    """
    if completion_time < req.arrival_time:
        raise InvariantViolation(
            f"request {req.id} completed at {completion_time} before arriving at {req.arrival_time}"
        )
    decision = state.decisions.pop(req.id, None)
    if decision is None:
        raise InvariantViolation(f"response for request {req.id} that was never routed")
    state.observed += 1
    return LatencySample(
        timestamp=completion_time,
        latency=completion_time - req.arrival_time,
        function_id=req.function_id,
        served_at=decision.target,
    )
