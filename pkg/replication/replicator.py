"""
Cloud-to-edge replicator.

Watch events from both stores are queued and handled one at a time. Each
event triggers a level-based reconcile of its service against the current
cloud and edge definitions: merge, compare, and apply only on difference.
The cloud is the source of truth; services that exist only at the edge are
left alone.
"""

from collections import deque
from typing import Deque, Dict, Optional, Tuple

from replication.specs import ServiceSpec, WatchEvent, WatchEventType, merge, needs_apply
from replication.store import ResourceStore
from utils.logger import get_logger
from utils.sites import Site

logger = get_logger(__name__)


class Replicator:
    """Keeps the edge store consistent with the cloud store."""

    def __init__(self, cloud: ResourceStore, edge: ResourceStore):
        self.cloud = cloud
        self.edge = edge
        self.applies = 0
        self.events_seen = 0
        self._pending: Deque[WatchEvent] = deque()
        self._last_generation: Dict[Tuple[Site, str], int] = {}
        self._attached = False

    def attach(self) -> None:
        if not self._attached:
            self.cloud.watch(self._pending.append)
            self.edge.watch(self._pending.append)
            self._attached = True

    def reconcile(self, name: str) -> bool:
        """
        Bring the edge copy of one service in line with the cloud.

        Args:
            name: Service name

        Returns:
            True when the edge store was written
        """
        cloud_spec = self.cloud.get(name)
        edge_spec = self.edge.get(name)

        if cloud_spec is None:
            if edge_spec is not None and edge_spec.is_replicated():
                self.edge.delete(name)
                self.applies += 1
                logger.info(f"Replicated delete of {name} to edge")
                return True
            return False

        current = edge_spec if edge_spec is not None else ServiceSpec(name=name)
        merged = merge(cloud_spec, current)
        if edge_spec is not None and not needs_apply(merged, edge_spec):
            return False
        self.edge.apply(merged)
        self.applies += 1
        logger.info(f"Applied {name} to edge from cloud generation {cloud_spec.generation}")
        return True

    def _is_stale(self, event: WatchEvent) -> bool:
        key = (event.source, event.spec.name)
        last = self._last_generation.get(key)
        if event.kind == WatchEventType.DELETED:
            self._last_generation.pop(key, None)
            return False
        if last is not None and event.spec.generation <= last:
            return True
        self._last_generation[key] = event.spec.generation
        return False

    def drain(self) -> int:
        """
        Handle queued watch events until none are left.

        Returns:
            Number of edge writes made
        """
        before = self.applies
        while self._pending:
            event = self._pending.popleft()
            self.events_seen += 1
            if self._is_stale(event):
                logger.debug(f"Skipping stale {event.kind.value} for {event.spec.name}")
                continue
            self.reconcile(event.spec.name)
        return self.applies - before

    def resync(self) -> int:
        """Reconcile every known service, then drain the resulting events."""
        before = self.applies
        for name in sorted(set(self.cloud.names()) | set(self.edge.names())):
            self.reconcile(name)
        self.drain()
        return self.applies - before


def reconcile_loop(
    cloud: ResourceStore,
    edge: ResourceStore,
    replicator: Optional[Replicator] = None
) -> int:
    """
    Run the replicator until both stores are quiescent.

    Args:
        cloud: Source-of-truth store
        edge: Edge store
        replicator: Existing replicator; a new attached one is created if None

    Returns:
        Number of edge writes made by this call
    """
    if replicator is None:
        replicator = Replicator(cloud, edge)
        replicator.attach()
        return replicator.resync()
    return replicator.drain()
