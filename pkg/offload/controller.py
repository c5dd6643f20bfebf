"""
Offloading controller.

Turns the p95/p50 latency ratio seen at the edge gateway into the percentage
of traffic sent to the cloud: the ratio history is smoothed with exponentially
decaying weights, mapped onto [0, 100] between a soft and a hard limit, and
blended into the previous percentage with an inertia factor.

All functions are pure transitions over OffloadState values.
"""

from dataclasses import dataclass, replace
from typing import Optional, Protocol, Tuple

import numpy as np

from config import GatewayConfig, OffloadConfig
from metrics.window import LatencyWindow, percentile, prune, sample_count
from utils.errors import ContractViolation
from utils.logger import get_logger
from utils.sites import Site

logger = get_logger(__name__)

NEUTRAL_RATIO = 1.0


@dataclass(frozen=True)
class OffloadState:
    """Controller state; ratio_history is most recent first."""
    ratio_history: Tuple[float, ...] = ()
    traffic_pct: float = 0.0
    last_ratio: float = NEUTRAL_RATIO
    last_smoothed: float = NEUTRAL_RATIO
    last_target: float = 0.0


def latency_ratio(window: LatencyWindow, served_at: Optional[Site] = None) -> float:
    """
    Ratio of p95 to p50 over the window.

    Args:
        window: Latency samples
        served_at: Restrict to one site (None pools all responses)

    Returns:
        p95/p50, or 1.0 when there are fewer than min_samples samples
    """
    if sample_count(window, served_at) < window.min_samples:
        return NEUTRAL_RATIO
    p50 = percentile(window, 50, served_at)
    if p50 <= 0:
        logger.warning("Degenerate latency distribution (p50 = 0), using neutral ratio")
        return NEUTRAL_RATIO
    return percentile(window, 95, served_at) / p50


def decayed_ratio(state: OffloadState, cfg: OffloadConfig) -> float:
    """Weighted mean of the newest min(c_t, len - 1) + 1 ratios, weights c_decay**k."""
    history = state.ratio_history
    if not history:
        return NEUTRAL_RATIO
    m = min(cfg.c_t, len(history) - 1)
    values = np.asarray(history[: m + 1], dtype=float)
    weights = cfg.c_decay ** np.arange(m + 1, dtype=float)
    smoothed = float(np.dot(weights, values) / weights.sum())
    return min(max(smoothed, float(values.min())), float(values.max()))


def target_traffic(smoothed: float, cfg: OffloadConfig) -> float:
    """
    Map a smoothed ratio onto a cloud traffic percentage.

    Args:
        smoothed: Smoothed latency ratio
        cfg: Controller constants

    Returns:
        0 below c_soft, 100 above c_hard, linear in between
    """
    if smoothed < cfg.c_soft:
        return 0.0
    if smoothed > cfg.c_hard:
        return 100.0
    return 100.0 * (smoothed - cfg.c_soft) / (cfg.c_hard - cfg.c_soft)


def update_traffic(state: OffloadState, target: float, cfg: OffloadConfig) -> OffloadState:
    """Blend the target into the current percentage: R * c_in + target * (1 - c_in)."""
    if not 0.0 <= target <= 100.0:
        raise ContractViolation(f"target traffic must be in [0, 100], got {target}")
    pct = state.traffic_pct * cfg.c_in + target * (1.0 - cfg.c_in)
    return replace(state, traffic_pct=min(max(pct, 0.0), 100.0), last_target=target)


def control_step(
    state: OffloadState,
    window: LatencyWindow,
    cfg: OffloadConfig,
    now: Optional[float] = None
) -> OffloadState:
    """
    Run one controller iteration.

    Args:
        state: Current controller state
        window: Latency window (pruned to `now` when given)
        cfg: Controller constants
        now: Simulated time of the tick

    Returns:
        New state with the ratio pushed and the traffic percentage updated
    """
    if now is not None:
        prune(window, now)
    served_at = Site.EDGE if cfg.sample_scope == "edge_only" else None
    ratio = latency_ratio(window, served_at)
    history = ((ratio,) + state.ratio_history)[: cfg.c_t + 1]
    state = replace(state, ratio_history=history, last_ratio=ratio)
    smoothed = decayed_ratio(state, cfg)
    target = target_traffic(smoothed, cfg)
    state = replace(update_traffic(state, target, cfg), last_smoothed=smoothed)
    logger.debug(
        f"Control step: r={ratio:.3f} smoothed={smoothed:.3f} "
        f"target={target:.1f}% traffic={state.traffic_pct:.2f}%"
    )
    return state


class OffloadStrategy(Protocol):
    """Decides the cloud traffic percentage at every control tick."""

    def initial_state(self) -> OffloadState:
        ...

    def step(self, state: OffloadState, window: LatencyWindow, now: float) -> OffloadState:
        ...


class LatencyRatioStrategy:
    """Controller-driven split ("auto")."""

    def __init__(self, cfg: OffloadConfig):
        self.cfg = cfg

    def initial_state(self) -> OffloadState:
        return OffloadState()

    def step(self, state: OffloadState, window: LatencyWindow, now: float) -> OffloadState:
        return control_step(state, window, self.cfg, now)


class FixedSplitStrategy:
    """Constant split; the ratio is still observed so it shows up in the series."""

    def __init__(self, pct: float, cfg: OffloadConfig):
        if not 0.0 <= pct <= 100.0:
            raise ContractViolation(f"fixed split must be in [0, 100], got {pct}")
        self.pct = pct
        self.cfg = cfg

    def initial_state(self) -> OffloadState:
        return OffloadState(traffic_pct=self.pct, last_target=self.pct)

    def step(self, state: OffloadState, window: LatencyWindow, now: float) -> OffloadState:
        prune(window, now)
        served_at = Site.EDGE if self.cfg.sample_scope == "edge_only" else None
        ratio = latency_ratio(window, served_at)
        return replace(state, last_ratio=ratio, last_smoothed=ratio)


def build_strategy(gateway: GatewayConfig, offload: OffloadConfig) -> OffloadStrategy:
    if gateway.mode == "auto":
        return LatencyRatioStrategy(offload)
    return FixedSplitStrategy(gateway.fixed_pct, offload)
