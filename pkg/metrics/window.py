"""
Sliding-window latency store.

A LatencyWindow has a single owner: the event loop records responses into it
and the controller reads percentiles from it between events. Callers sharing
a window across threads must serialize record/percentile themselves.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, Optional

import numpy as np

from utils.errors import ContractViolation, InsufficientDataError
from utils.logger import get_logger
from utils.sites import Site

logger = get_logger(__name__)


@dataclass(frozen=True)
class LatencySample:
    timestamp: float
    latency: float
    function_id: str
    served_at: Site


@dataclass
class LatencyWindow:
    """Time-ordered latency samples younger than window_length."""
    window_length: float = 30.0
    min_samples: int = 10
    samples: Deque[LatencySample] = field(default_factory=deque)

    def __post_init__(self):
        if self.window_length <= 0:
            raise ContractViolation(f"window_length must be positive, got {self.window_length}")


def prune(window: LatencyWindow, now: float) -> LatencyWindow:
    """Drop samples with now - timestamp > window_length."""
    samples = window.samples
    while samples and now - samples[0].timestamp > window.window_length:
        samples.popleft()
    return window


def record(window: LatencyWindow, sample: LatencySample) -> LatencyWindow:
    """
    Append a sample and prune everything that fell out of the window.

    Args:
        window: Window to update in place
        sample: New latency sample

    Returns:
        The same window

    Raises:
        ContractViolation: If the latency is negative or the timestamp goes back in time
    """
    if sample.latency < 0:
        raise ContractViolation(f"latency must be non-negative, got {sample.latency}")
    if window.samples and sample.timestamp < window.samples[-1].timestamp:
        raise ContractViolation(
            f"sample at t={sample.timestamp} recorded after t={window.samples[-1].timestamp}"
        )
    window.samples.append(sample)
    return prune(window, sample.timestamp)


def _latencies(window: LatencyWindow, served_at: Optional[Site]) -> Iterable[float]:
    for sample in window.samples:
        if served_at is None or sample.served_at == served_at:
            yield sample.latency


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Element at 1-based rank ceil(q/100 * n) of the sorted values."""
    n = values.size
    rank = min(max(math.ceil(q * n / 100), 1), n)
    return float(np.partition(values, rank - 1)[rank - 1])


def sample_count(window: LatencyWindow, served_at: Optional[Site] = None) -> int:
    if served_at is None:
        return len(window.samples)
    return sum(1 for _ in _latencies(window, served_at))


def percentile(window: LatencyWindow, q: float, served_at: Optional[Site] = None) -> float:
    """
    Nearest-rank percentile of the latencies in the window.

    Args:
        window: Sample window
        q: Percentile in (0, 100]
        served_at: Restrict to samples served at one site

    Returns:
        The sample at 1-based rank ceil(q/100 * n)

    Raises:
        ContractViolation: If q is outside (0, 100]
        InsufficientDataError: If there are no matching samples
    """
    if not 0 < q <= 100:
        raise ContractViolation(f"percentile must be in (0, 100], got {q}")
    values = np.fromiter(_latencies(window, served_at), dtype=float)
    if values.size == 0:
        raise InsufficientDataError("no latency samples in window")
    return nearest_rank(values, q)


def snapshot(window: LatencyWindow, served_at: Optional[Site] = None) -> Dict[str, float]:
    """Count plus p50/p95/p99, with zeros for an empty window."""
    count = sample_count(window, served_at)
    if count == 0:
        return {"count": 0, "p50": 0.0, "p95": 0.0, "p99": 0.0}
    return {
        "count": count,
        "p50": percentile(window, 50, served_at),
        "p95": percentile(window, 95, served_at),
        "p99": percentile(window, 99, served_at),
    }
