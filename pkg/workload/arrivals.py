"""
Ramped arrival process: low rate, linear ramp, hold at the high rate, then an
optional zero-rate tail. Arrivals are a non-homogeneous Poisson process
sampled by thinning against the peak rate.
"""

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from config import WorkloadConfig
from utils.errors import ContractViolation


@dataclass(frozen=True)
class RampSchedule:
    low_rate: float
    high_rate: float
    warm_s: float
    ramp_s: float
    hold_s: float
    tail_s: float = 0.0

    def __post_init__(self):
        if self.low_rate < 0 or self.low_rate > self.high_rate:
            raise ContractViolation(
                f"rates must satisfy 0 <= low <= high, got {self.low_rate}, {self.high_rate}"
            )
        if min(self.warm_s, self.ramp_s, self.hold_s) <= 0 or self.tail_s < 0:
            raise ContractViolation("phase durations must be positive")

    @property
    def active_end(self) -> float:
        """Time the hold phase ends."""
        return self.warm_s + self.ramp_s + self.hold_s

    @property
    def end(self) -> float:
        return self.active_end + self.tail_s

    @classmethod
    def from_config(cls, cfg: WorkloadConfig) -> "RampSchedule":
        return cls(
            low_rate=cfg.low_rate,
            high_rate=cfg.high_rate,
            warm_s=cfg.warm_s,
            ramp_s=cfg.ramp_s,
            hold_s=cfg.hold_s,
            tail_s=cfg.tail_s,
        )


def rate_at(schedule: RampSchedule, t: float) -> float:
    """
    Arrival rate at time t.

    Args:
        schedule: Ramp schedule
        t: Simulated time, t >= 0

    Returns:
        Requests per second; 0 after the hold phase
    """
    if t < 0:
        raise ContractViolation(f"time must be non-negative, got {t}")
    if t < schedule.warm_s:
        return schedule.low_rate
    ramp_end = schedule.warm_s + schedule.ramp_s
    if t < ramp_end:
        fraction = (t - schedule.warm_s) / schedule.ramp_s
        return schedule.low_rate + (schedule.high_rate - schedule.low_rate) * fraction
    if t <= schedule.active_end:
        return schedule.high_rate
    return 0.0


def next_arrival(schedule: RampSchedule, now: float, rng: np.random.Generator) -> Optional[float]:
    """
    Next arrival strictly after `now`.

    Args:
        schedule: Ramp schedule
        now: Current simulated time
        rng: Arrival stream

    Returns:
        Arrival timestamp, or None when no arrival remains in the schedule
    """
    peak = schedule.high_rate
    if peak <= 0:
        return None
    t = now
    while True:
        t += rng.exponential(1.0 / peak)
        if t > schedule.active_end:
            return None
        if t > now and rng.random() * peak < rate_at(schedule, t):
            return t


def arrival_times(schedule: RampSchedule, rng: np.random.Generator, start: float = 0.0) -> Iterator[float]:
    """Every arrival of the schedule, in order."""
    t = next_arrival(schedule, start, rng)
    while t is not None:
        yield t
        t = next_arrival(schedule, t, rng)
