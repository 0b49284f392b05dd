"""Per-node service directory: registration, propagated storage, filtered
lookup, cache expiry/refresh, and deregistration with tombstones.

Each DirectoryState belongs to exactly one node and is only mutated from
the single-threaded event loop that owns it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .model import (
    LayerKind,
    ServiceDescriptor,
    ServiceScope,
    Tombstone,
    Version,
)


class DirectoryError(Exception):
    """Base for rule violations; ``code`` is stable for metrics/traces."""

    code = "directory-error"


class GlobalAtNonTsd(DirectoryError):
    code = "GlobalAtNonTsd"


class LocalAtTsd(DirectoryError):
    code = "LocalAtTsd"


class StaleVersion(DirectoryError):
    code = "StaleVersion"


class NotCached(DirectoryError):
    code = "NotCached"


class NotOrigin(DirectoryError):
    code = "NotOrigin"


class UnknownService(DirectoryError):
    code = "UnknownService"


class LookupAtNonLsd(DirectoryError):
    code = "LookupAtNonLsd"


class EntryKind(enum.Enum):
    """How an entry got here, which decides its lifetime.

    REGISTERED entries exist only at the descriptor's origin node.
    PERSISTENT entries were pushed or peer-synced and never expire.
    VOLATILE entries are demand-driven caches with an expiry tick.
    """

    REGISTERED = "Registered"
    PERSISTENT = "Persistent"
    VOLATILE = "Volatile"

    def __str__(self) -> str:
        return self.value


class StoreOutcome(enum.Enum):
    STORED = "stored"
    UPGRADED = "upgraded"
    IGNORED_STALE = "ignored-stale"
    IGNORED_TOMBSTONE = "ignored-tombstone"

    def __str__(self) -> str:
        return self.value


@dataclass
class DirectoryEntry:
    descriptor: ServiceDescriptor
    kind: EntryKind
    expires_at: int | None  # present iff kind is VOLATILE
    refresh_count: int
    stored_at: int

    @property
    def version(self) -> Version:
        return self.descriptor.version

    def is_live(self, now: int) -> bool:
        return self.kind is not EntryKind.VOLATILE or self.expires_at > now


@dataclass(frozen=True)
class LookupQuery:
    """Filtered search. Every given field must match; an empty query
    matches every entry."""

    tags: frozenset[str] = frozenset()
    name_prefix: str | None = None
    position: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.tags, frozenset):
            object.__setattr__(self, "tags", frozenset(self.tags))

    def matches(self, desc: ServiceDescriptor) -> bool:
        if not self.tags <= desc.tags:
            return False
        if self.name_prefix is not None and not desc.name.startswith(self.name_prefix):
            return False
        if self.position is not None and not desc.relevance_area.contains_point(*self.position):
            return False
        return True


@dataclass
class DirectoryState:
    """One node's directory: entries, tombstones, and a utilization log."""

    node_id: str
    layer: LayerKind
    entries: dict[str, DirectoryEntry] = field(default_factory=dict)
    tombstones: dict[str, Tombstone] = field(default_factory=dict)
    utilization_log: list[tuple[str, int]] = field(default_factory=list)

    def register(self, desc: ServiceDescriptor, now: int) -> DirectoryEntry:
        """Store a descriptor published by a provider at this node.

        Globally scoped services are accepted only at the top layer; local
        ones only at NSD/LSD. A higher-version re-registration replaces the
        old entry and clears any tombstone.
        """
        if desc.origin_node != self.node_id:
            raise ValueError(f"descriptor origin {desc.origin_node!r} is not this node ({self.node_id!r})")
        if desc.scope is ServiceScope.GLOBAL and self.layer is not LayerKind.TSD:
            raise GlobalAtNonTsd(f"{desc.service_id}: global services register at a TSD, not {self.layer}")
        if desc.scope is ServiceScope.LOCAL and self.layer is LayerKind.TSD:
            raise LocalAtTsd(f"{desc.service_id}: local services register at an NSD or LSD")
        tomb = self.tombstones.get(desc.service_id)
        if tomb is not None and tomb.version >= desc.version:
            raise StaleVersion(f"{desc.service_id}: version {desc.version} <= tombstone {tomb.version}")
        cur = self.entries.get(desc.service_id)
        if cur is not None and cur.version >= desc.version:
            raise StaleVersion(f"{desc.service_id}: version {desc.version} <= stored {cur.version}")
        entry = DirectoryEntry(desc, EntryKind.REGISTERED, None, 0, now)
        self.entries[desc.service_id] = entry
        self.tombstones.pop(desc.service_id, None)
        return entry

    def lookup(self, query: LookupQuery, now: int) -> tuple[list[ServiceDescriptor], bool]:
        """Return live entries matching every query field, plus a miss flag.

        Results are sorted by (name, service_id). One utilization record is
        appended per returned descriptor. miss=True (zero matches) is the
        signal for reactive escalation toward the parent.
        """
        matches = [
            e.descriptor
            for e in self.entries.values()
            if e.is_live(now) and query.matches(e.descriptor)
        ]
        matches.sort(key=lambda d: (d.name, d.service_id))
        for desc in matches:
            self.utilization_log.append((desc.service_id, now))
        return matches, not matches

    def store_propagated(
        self,
        desc: ServiceDescriptor,
        kind: EntryKind,
        now: int,
        ttl: int | None = None,
    ) -> StoreOutcome:
        """Store a descriptor received from another node, last-writer-wins.

        Ties on version are broken by storage class: a persistent store
        upgrades an equal-version volatile cache, but never the other way
        around. Versions at or below a tombstone are ignored. Expired
        volatile entries count as absent.
        """
        if kind is EntryKind.REGISTERED:
            raise ValueError("propagated entries cannot be Registered")
        if kind is EntryKind.VOLATILE and ttl is None:
            raise ValueError("volatile store needs a ttl")
        tomb = self.tombstones.get(desc.service_id)
        if tomb is not None and tomb.version >= desc.version:
            return StoreOutcome.IGNORED_TOMBSTONE
        cur = self.entries.get(desc.service_id)
        if cur is not None and cur.is_live(now):
            if cur.version > desc.version:
                return StoreOutcome.IGNORED_STALE
            if cur.version == desc.version:
                if kind is EntryKind.PERSISTENT and cur.kind is EntryKind.VOLATILE:
                    cur.descriptor = desc
                    cur.kind = EntryKind.PERSISTENT
                    cur.expires_at = None
                    cur.refresh_count = 0
                    cur.stored_at = now
                    return StoreOutcome.UPGRADED
                return StoreOutcome.IGNORED_STALE
        expires = now + ttl if kind is EntryKind.VOLATILE else None
        self.entries[desc.service_id] = DirectoryEntry(desc, kind, expires, 0, now)
        self.tombstones.pop(desc.service_id, None)
        return StoreOutcome.STORED

    def refresh(self, service_id: str, now: int, ttl: int) -> DirectoryEntry:
        """Reset a volatile entry's expiry to now + ttl and count the refresh."""
        entry = self.entries.get(service_id)
        if entry is None or entry.kind is not EntryKind.VOLATILE or not entry.is_live(now):
            raise NotCached(f"{service_id}: no live volatile entry at {self.node_id}")
        entry.expires_at = now + ttl
        entry.refresh_count += 1
        return entry

    def expire(self, now: int) -> list[str]:
        """Drop every volatile entry whose expiry tick has been reached."""
        dead = sorted(
            sid
            for sid, e in self.entries.items()
            if e.kind is EntryKind.VOLATILE and e.expires_at <= now
        )
        for sid in dead:
            del self.entries[sid]
        return dead

    def deregister(self, service_id: str) -> tuple[Tombstone, ServiceDescriptor]:
        """Remove a registered entry; returns the tombstone to synchronize."""
        cur = self.entries.get(service_id)
        if cur is None or cur.kind is not EntryKind.REGISTERED:
            raise NotOrigin(f"{service_id}: not registered at {self.node_id}")
        tomb = Tombstone(service_id, Version(cur.version.stamp + 1, self.node_id), self.node_id)
        del self.entries[service_id]
        self.tombstones[service_id] = tomb
        return tomb, cur.descriptor

    def apply_tombstone(self, tomb: Tombstone) -> tuple[bool, ServiceDescriptor | None]:
        """Record a deletion marker; drop any entry it supersedes.

        Returns (recorded, dropped descriptor). Tombstones are recorded even
        when no entry is present, so late-arriving stale copies stay out.
        """
        cur_tomb = self.tombstones.get(tomb.service_id)
        recorded = cur_tomb is None or cur_tomb.version < tomb.version
        if recorded:
            self.tombstones[tomb.service_id] = tomb
        best = self.tombstones[tomb.service_id]
        dropped = None
        entry = self.entries.get(tomb.service_id)
        if entry is not None and entry.version <= best.version:
            dropped = entry.descriptor
            del self.entries[tomb.service_id]
        return recorded, dropped

    def live_entry(self, service_id: str, now: int) -> DirectoryEntry | None:
        entry = self.entries.get(service_id)
        if entry is not None and entry.is_live(now):
            return entry
        return None

    def visible_ids(self, now: int) -> dict[str, Version]:
        """Snapshot of live service ids and their versions (no logging)."""
        return {sid: e.version for sid, e in self.entries.items() if e.is_live(now)}
