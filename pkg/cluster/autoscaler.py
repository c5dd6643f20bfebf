"""
Concurrency-based autoscaler with scale-to-zero.

Each tick the desired instance count of every function is
ceil(mean concurrency over scale_window / target_concurrency), clamped to
[0, max_instances_per_function], and 0 once the function has held no request
for idle_timeout. Missing instances are created cold; idle instances past
idle_timeout are removed while the count stays above desired.
"""

from dataclasses import dataclass, field
from typing import Dict, List

from cluster.pool import (
    FunctionInstance,
    Pool,
    checkpoint,
    create_instance,
    desired_instances,
    mean_concurrency,
    remove_instance,
)
from config import AutoscalerConfig
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class ScaleResult:
    created: List[FunctionInstance] = field(default_factory=list)
    removed: List[str] = field(default_factory=list)
    desired: Dict[str, int] = field(default_factory=dict)


def autoscale_step(pool: Pool, now: float, cfg: AutoscalerConfig) -> ScaleResult:
    """
    Run one autoscaler tick on a pool.

    Args:
        pool: Pool to scale in place
        now: Current simulated time
        cfg: Autoscaler settings

    Returns:
        ScaleResult with the new cold instances (callers schedule their
        readiness) and the ids of removed instances
    """
    result = ScaleResult()
    checkpoint(pool, now, cfg.scale_window_s)
    max_instances = min(cfg.max_instances_per_function, pool.max_per_function)

    for function_id in list(pool.trackers):
        mean = mean_concurrency(pool, function_id, now, cfg.scale_window_s)
        desired = desired_instances(mean, cfg.target_concurrency, max_instances)
        # an idle function goes to zero whatever load scale_window still remembers
        if pool.trackers[function_id].idle_for(now) >= cfg.idle_timeout_s:
            desired = 0
        result.desired[function_id] = desired
        instances = pool.function_instances(function_id)

        for _ in range(desired - len(instances)):
            instance = create_instance(pool, function_id, now)
            if instance is None:
                break
            result.created.append(instance)

        idle = [
            inst for inst in instances
            if not inst.is_cold
            and inst.load == 0
            and inst.idle_since is not None
            and now - inst.idle_since >= cfg.idle_timeout_s
        ]
        surplus = len(pool.function_instances(function_id)) - max(desired, cfg.min_instances)
        for inst in sorted(idle, key=lambda i: (i.idle_since, i.order))[:max(surplus, 0)]:
            remove_instance(pool, inst.instance_id)
            result.removed.append(inst.instance_id)

    if result.created or result.removed:
        logger.debug(
            f"{pool.site.value} autoscale at t={now:.1f}: desired={result.desired} "
            f"+{len(result.created)} -{len(result.removed)}"
        )
    return result


def instance_counts(pool: Pool) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for inst in pool.instances.values():
        counts[inst.function_id] = counts.get(inst.function_id, 0) + 1
    return counts
