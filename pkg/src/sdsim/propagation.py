"""Inter-node distribution rules: preemptive push targeting, reactive
request/response chains, deletion sync, and top-layer anti-entropy.

Everything here is a pure function over immutable messages and the
directory states handed in by the event loop. Distribution is strictly
downward: descriptors only ever travel from a node into its subtree,
with the top-layer peer mesh as the one (synchronizing, not
propagating) exception.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .directory import DirectoryState, EntryKind, LookupQuery, StoreOutcome
from .model import (
    LayerKind,
    ServiceDescriptor,
    ServiceScope,
    Tombstone,
    Topology,
    area_intersects,
)


class MessageKind(enum.Enum):
    PUSH = "Push"
    REQUEST = "Request"
    RESPONSE = "Response"
    DELETE_SYNC = "DeleteSync"
    PEER_SYNC = "PeerSync"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PropagationMessage:
    """One hop of inter-node traffic.

    Push/DeleteSync travel parent->child and carry ``route_targets``, the
    full target set fixed at send time, so receivers forward without
    re-deriving it. Request travels child->parent accumulating
    ``hop_chain`` (visited nodes, requester first); Response retraces that
    chain, ``hop_chain`` holding the nodes still to visit.
    """

    kind: MessageKind
    from_node: str
    to_node: str
    descriptors: tuple[ServiceDescriptor, ...] = ()
    tombstone: Tombstone | None = None
    query: LookupQuery | None = None
    origin_lsd: str | None = None
    hop_chain: tuple[str, ...] = ()
    route_targets: frozenset[str] = frozenset()

    @property
    def service_ids(self) -> tuple[str, ...]:
        if self.tombstone is not None:
            return (self.tombstone.service_id,)
        return tuple(d.service_id for d in self.descriptors)


def ppp_targets(topology: Topology, root: str, desc: ServiceDescriptor) -> frozenset[str]:
    """Nodes below ``root`` that should hold a pushed copy of ``desc``.

    LSDs qualify when their coverage area overlaps the descriptor's
    relevance area; intermediate NSDs qualify when at least one LSD below
    them does. Nothing above ``root`` or in a sibling subtree is ever
    selected, and an LSD root has no targets at all.
    """
    included: set[str] = set()
    for node in topology.descendants(root):
        if topology.layer_of(node) is LayerKind.LSD and area_intersects(
            topology.coverage_of(node), desc.relevance_area
        ):
            included.add(node)
    targets = set(included)
    for node in topology.descendants(root):
        if topology.layer_of(node) is LayerKind.NSD and any(
            lsd in included for lsd in topology.descendants(node)
        ):
            targets.add(node)
    return frozenset(targets)


def push_messages(
    topology: Topology,
    sender: str,
    desc: ServiceDescriptor,
    targets: frozenset[str],
) -> list[PropagationMessage]:
    """Push hops from ``sender`` to its children inside the target set."""
    return [
        PropagationMessage(
            MessageKind.PUSH, sender, child, descriptors=(desc,), route_targets=targets
        )
        for child in topology.children_of(sender)
        if child in targets
    ]


def delete_sync_messages(
    topology: Topology,
    sender: str,
    tomb: Tombstone,
    desc: ServiceDescriptor,
    targets: frozenset[str],
) -> list[PropagationMessage]:
    """Deletion hops mirroring the push fan-out for the dead descriptor."""
    return [
        PropagationMessage(
            MessageKind.DELETE_SYNC,
            sender,
            child,
            descriptors=(desc,),
            tombstone=tomb,
            route_targets=targets,
        )
        for child in topology.children_of(sender)
        if child in targets
    ]


def chain_filter(
    topology: Topology, descs: list[ServiceDescriptor], origin_lsd: str
) -> list[ServiceDescriptor]:
    """Drop locally scoped descriptors irrelevant to the requesting LSD.

    Relevance is judged against the consumer's location: the coverage area
    of the LSD that started the chain, not the answering node's own region.
    Globally scoped descriptors always pass.
    """
    coverage = topology.coverage_of(origin_lsd)
    return [
        d
        for d in descs
        if d.scope is ServiceScope.GLOBAL or area_intersects(d.relevance_area, coverage)
    ]


def check_edge_legal(topology: Topology, msg: PropagationMessage) -> bool:
    """Direction invariant for a single message hop.

    Push and DeleteSync descend one tree edge, Request ascends one, a
    Response hop descends back along its recorded chain, and PeerSync
    connects two distinct top-level nodes.
    """
    if not (topology.has_node(msg.from_node) and topology.has_node(msg.to_node)):
        return False
    if msg.kind in (MessageKind.PUSH, MessageKind.DELETE_SYNC):
        return topology.parent_of(msg.to_node) == msg.from_node
    if msg.kind is MessageKind.REQUEST:
        return topology.parent_of(msg.from_node) == msg.to_node
    if msg.kind is MessageKind.RESPONSE:
        if topology.parent_of(msg.to_node) != msg.from_node:
            return False
        return not msg.hop_chain or msg.hop_chain[-1] != msg.to_node
    if msg.kind is MessageKind.PEER_SYNC:
        return (
            msg.from_node != msg.to_node
            and topology.layer_of(msg.from_node) is LayerKind.TSD
            and topology.layer_of(msg.to_node) is LayerKind.TSD
        )
    return False


@dataclass(frozen=True)
class MergeGain:
    """One fact a peer learned during a merge: a fresher entry, or a
    tombstone (with the descriptor it displaced, if any)."""

    descriptor: ServiceDescriptor | None = None
    tombstone: Tombstone | None = None
    dropped: ServiceDescriptor | None = None


@dataclass
class MergeOutcome:
    gained_a: list[MergeGain] = field(default_factory=list)
    gained_b: list[MergeGain] = field(default_factory=list)


def tsd_peer_sync(a: DirectoryState, b: DirectoryState, now: int) -> MergeOutcome:
    """Anti-entropy merge of two top-level peers.

    For every service id both sides converge on the version-maximal fact
    across both states, a tombstone winning a version tie with an entry.
    The merge is commutative, associative, and idempotent. Adopted entries
    are stored persistently (registered entries stay registered at their
    origin); returns what each side newly learned so the caller can keep
    propagating downward.
    """
    if a.layer is not LayerKind.TSD or b.layer is not LayerKind.TSD:
        raise ValueError("peer sync is only defined between top-level nodes")
    outcome = MergeOutcome()
    ids = set(a.entries) | set(b.entries) | set(a.tombstones) | set(b.tombstones)
    for sid in sorted(ids):
        # (version, tombstone-beats-entry, fact) — max picks the winner.
        candidates = []
        for state in (a, b):
            entry = state.entries.get(sid)
            if entry is not None:
                candidates.append((entry.version, 0, entry.descriptor))
            tomb = state.tombstones.get(sid)
            if tomb is not None:
                candidates.append((tomb.version, 1, tomb))
        _, is_tomb, fact = max(candidates, key=lambda c: (c[0], c[1]))
        for state, gained in ((a, outcome.gained_a), (b, outcome.gained_b)):
            if is_tomb:
                recorded, dropped = state.apply_tombstone(fact)
                if recorded or dropped is not None:
                    gained.append(MergeGain(tombstone=fact, dropped=dropped))
            else:
                res = state.store_propagated(fact, EntryKind.PERSISTENT, now)
                if res in (StoreOutcome.STORED, StoreOutcome.UPGRADED):
                    gained.append(MergeGain(descriptor=fact))
    return outcome
