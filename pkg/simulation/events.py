"""
Event queue for the simulator.

Events are ordered by (time, sequence); the sequence number is the insertion
counter, so simultaneous events run in the order they were scheduled.
"""

import heapq
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Deque, List, Optional, Tuple

from utils.errors import InvariantViolation

TRACE_TAIL = 50


class EventKind(str, Enum):
    ARRIVAL = "Arrival"
    DISPATCH_COMPLETE = "DispatchComplete"
    TRANSFER_COMPLETE = "TransferComplete"
    INSTANCE_READY = "InstanceReady"
    AUTOSCALE_TICK = "AutoscaleTick"
    CONTROL_TICK = "ControlTick"
    METRICS_TICK = "MetricsTick"


@dataclass(frozen=True)
class SimEvent:
    time: float
    sequence: int
    kind: EventKind
    payload: Any = None

    def describe(self) -> str:
        return f"t={self.time:.6f} #{self.sequence} {self.kind.value} {self.payload!r}"


@dataclass
class EventQueue:
    """Simulation clock plus pending events."""
    now: float = 0.0
    _heap: List[Tuple[float, int, SimEvent]] = field(default_factory=list)
    _sequence: int = 0
    trace: Deque[str] = field(default_factory=lambda: deque(maxlen=TRACE_TAIL))
    processed: int = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: float, kind: EventKind, payload: Any = None) -> SimEvent:
        """
        Add an event.

        Args:
            time: Simulated time, not earlier than the clock
            kind: Event kind
            payload: Kind-specific data

        Returns:
            The scheduled event

        Raises:
            InvariantViolation: If the event would run in the past
        """
        if time < self.now:
            raise InvariantViolation(
                f"{kind.value} scheduled at {time} before current time {self.now}",
                list(self.trace),
            )
        event = SimEvent(time, self._sequence, kind, payload)
        self._sequence += 1
        heapq.heappush(self._heap, (time, event.sequence, event))
        return event

    def pop(self) -> Optional[SimEvent]:
        """Advance the clock to the next event and return it."""
        if not self._heap:
            return None
        _, _, event = heapq.heappop(self._heap)
        self.now = event.time
        self.processed += 1
        self.trace.append(event.describe())
        return event

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None
