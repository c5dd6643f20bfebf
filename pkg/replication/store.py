"""
In-memory resource store with synchronous watch callbacks.
One store stands in for each cluster's API server.
"""

from typing import Any, Callable, Dict, List, Optional

from replication.specs import ServiceSpec, WatchEvent, WatchEventType
from utils.logger import get_logger
from utils.sites import Site

logger = get_logger(__name__)

WatchCallback = Callable[[WatchEvent], None]


class ResourceStore:
    """Service definitions of one cluster, keyed by name."""

    def __init__(self, site: Site):
        self.site = site
        self._services: Dict[str, ServiceSpec] = {}
        self._watchers: List[WatchCallback] = []

    def watch(self, callback: WatchCallback) -> None:
        """Register a callback invoked synchronously on every change."""
        self._watchers.append(callback)

    def _emit(self, kind: WatchEventType, spec: ServiceSpec) -> None:
        event = WatchEvent(source=self.site, kind=kind, spec=spec.model_copy(deep=True))
        for callback in self._watchers:
            callback(event)

    def get(self, name: str) -> Optional[ServiceSpec]:
        spec = self._services.get(name)
        return spec.model_copy(deep=True) if spec is not None else None

    def names(self) -> List[str]:
        return list(self._services)

    def list(self) -> List[ServiceSpec]:
        return [spec.model_copy(deep=True) for spec in self._services.values()]

    def apply(self, spec: ServiceSpec) -> ServiceSpec:
        """
        Create or replace a service definition.

        Args:
            spec: Desired definition; its generation is ignored

        Returns:
            Stored definition; the generation is bumped only when content changed
        """
        current = self._services.get(spec.name)
        if current is not None and (
            current.managed_spec == spec.managed_spec
            and current.status == spec.status
            and current.annotations == spec.annotations
        ):
            return current.model_copy(deep=True)
        generation = current.generation + 1 if current is not None else 1
        stored = spec.model_copy(update={"generation": generation}, deep=True)
        self._services[spec.name] = stored
        kind = WatchEventType.ADDED if current is None else WatchEventType.MODIFIED
        logger.debug(f"{self.site.value} store: {kind.value} {spec.name} generation {generation}")
        self._emit(kind, stored)
        return stored.model_copy(deep=True)

    def update_status(self, name: str, status: Dict[str, Any]) -> Optional[ServiceSpec]:
        """Merge edge-local status fields into a stored definition."""
        current = self._services.get(name)
        if current is None:
            return None
        merged = {**current.status, **status}
        return self.apply(current.model_copy(update={"status": merged}, deep=True))

    def delete(self, name: str) -> bool:
        spec = self._services.pop(name, None)
        if spec is None:
            return False
        logger.debug(f"{self.site.value} store: Deleted {name}")
        self._emit(WatchEventType.DELETED, spec)
        return True
