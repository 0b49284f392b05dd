"""Core domain model: hierarchy layers, geographic areas, service
descriptors, version stamps, and the validated directory topology.

All types here are immutable values; operations are pure functions.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field


@functools.total_ordering
class LayerKind(enum.Enum):
    """Directory layer. Ordering is total: TSD > NSD > LSD."""

    TSD = 3
    NSD = 2
    LSD = 1

    def __lt__(self, other: "LayerKind") -> bool:
        if not isinstance(other, LayerKind):
            return NotImplemented
        return self.value < other.value

    def __str__(self) -> str:
        return self.name


class ServiceScope(enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"

    def __str__(self) -> str:
        return self.value


class PropagationStrategy(enum.Enum):
    """How a service's descriptor is distributed to lower layers.

    PPP pushes unsolicited and stores persistently; VRP answers demand
    and caches with a TTL. Every node supports both at once; the choice
    is per service.
    """

    PPP = "PPP"
    VRP = "VRP"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class Version:
    """Last-writer-wins version stamp: logical timestamp, then node id."""

    stamp: int
    node: str

    def __str__(self) -> str:
        return f"{self.stamp}@{self.node}"


def version_order(a: Version, b: Version) -> int:
    """Total order on version stamps: -1 if a < b, 0 if equal, 1 if a > b."""
    if a == b:
        return 0
    return -1 if a < b else 1


@dataclass(frozen=True)
class GeoArea:
    """Axis-aligned rectangle on the simulation plane.

    A rectangle with zero width or height is the empty area: it
    intersects nothing. Intersection requires overlap of positive area,
    so rectangles that only share an edge or corner do not intersect.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"malformed rectangle: {self}")

    @property
    def is_empty(self) -> bool:
        return self.x_min == self.x_max or self.y_min == self.y_max

    def intersects(self, other: "GeoArea") -> bool:
        return (
            min(self.x_max, other.x_max) > max(self.x_min, other.x_min)
            and min(self.y_max, other.y_max) > max(self.y_min, other.y_min)
        )

    def contains_point(self, x: float, y: float) -> bool:
        # Closed bounds: points on the boundary count as inside.
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def __str__(self) -> str:
        return f"({self.x_min},{self.y_min},{self.x_max},{self.y_max})"


#: Relevance area of globally scoped services: covers every coverage area.
FULL_PLANE = GeoArea(-1e9, -1e9, 1e9, 1e9)


def area_intersects(a: GeoArea, b: GeoArea) -> bool:
    """True iff the rectangles share a region of positive area."""
    return a.intersects(b)


@dataclass(frozen=True)
class ServiceDescriptor:
    """The published unit: identity, scope, relevance area, and access info.

    ``access_description`` is opaque text (a WSDL-like blob); it is stored
    and returned verbatim, never parsed. Globally scoped descriptors are
    normalized to a full-plane relevance area.
    """

    service_id: str
    provider_id: str
    name: str
    tags: frozenset[str]
    scope: ServiceScope
    relevance_area: GeoArea
    access_description: str
    version: Version
    origin_node: str
    strategy: PropagationStrategy

    def __post_init__(self) -> None:
        if not isinstance(self.tags, frozenset):
            object.__setattr__(self, "tags", frozenset(self.tags))
        if self.scope is ServiceScope.GLOBAL:
            object.__setattr__(self, "relevance_area", FULL_PLANE)
        elif self.relevance_area is None:
            raise ValueError(f"{self.service_id}: local service needs a relevance area")


@dataclass(frozen=True)
class Tombstone:
    """Deletion marker. Its version supersedes every earlier version of
    the same service, so stale copies can never be re-inserted."""

    service_id: str
    version: Version
    origin_node: str


@dataclass
class TopologySpec:
    """Raw, unvalidated description of a directory tree.

    ``edges`` are (parent, child) pairs; ``latency`` holds per-edge message
    delays in ticks (missing edges default to 1). ``tsd_peers`` may be given
    explicitly but must then equal the set of TSD nodes.
    """

    nodes: dict[str, LayerKind] = field(default_factory=dict)
    edges: list[tuple[str, str]] = field(default_factory=list)
    lsd_coverage: dict[str, GeoArea] = field(default_factory=dict)
    latency: dict[tuple[str, str], int] = field(default_factory=dict)
    tsd_peers: set[str] | None = None


@dataclass(frozen=True)
class TopologyViolation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.message}"


class TopologyError(Exception):
    """Raised by validate_topology; carries every violation found."""

    def __init__(self, violations: list[TopologyViolation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class Topology:
    """Validated, immutable directory tree. Construct via validate_topology."""

    def __init__(
        self,
        layers: dict[str, LayerKind],
        parent: dict[str, str],
        coverage: dict[str, GeoArea],
        latency: dict[tuple[str, str], int],
    ):
        self._layers = dict(layers)
        self._parent = dict(parent)
        self._coverage = dict(coverage)
        self._latency = dict(latency)
        children: dict[str, list[str]] = {n: [] for n in layers}
        for child, par in parent.items():
            children[par].append(child)
        self._children = {n: tuple(sorted(cs)) for n, cs in children.items()}
        self._nodes = tuple(sorted(layers))
        self._tsds = tuple(sorted(n for n, k in layers.items() if k is LayerKind.TSD))
        self._lsds = tuple(sorted(n for n, k in layers.items() if k is LayerKind.LSD))

    @property
    def node_ids(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def tsds(self) -> tuple[str, ...]:
        """All top-level nodes; they form a full peer mesh."""
        return self._tsds

    @property
    def lsds(self) -> tuple[str, ...]:
        return self._lsds

    def has_node(self, node: str) -> bool:
        return node in self._layers

    def layer_of(self, node: str) -> LayerKind:
        return self._layers[node]

    def parent_of(self, node: str) -> str | None:
        return self._parent.get(node)

    def children_of(self, node: str) -> tuple[str, ...]:
        return self._children[node]

    def descendants(self, node: str) -> tuple[str, ...]:
        """All strict descendants, in sorted order."""
        out: list[str] = []
        stack = list(self._children[node])
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(self._children[n])
        return tuple(sorted(out))

    def is_descendant(self, node: str, of: str) -> bool:
        cur = self._parent.get(node)
        while cur is not None:
            if cur == of:
                return True
            cur = self._parent.get(cur)
        return False

    def depth(self, node: str) -> int:
        """Number of parent hops to the top-level node."""
        d = 0
        cur = self._parent.get(node)
        while cur is not None:
            d += 1
            cur = self._parent.get(cur)
        return d

    def root_tsd_of(self, node: str) -> str:
        cur = node
        while self._parent.get(cur) is not None:
            cur = self._parent[cur]
        return cur

    def coverage_of(self, lsd: str) -> GeoArea:
        return self._coverage[lsd]

    def edge_latency(self, parent: str, child: str) -> int:
        return self._latency.get((parent, child), 1)


def validate_topology(spec: TopologySpec) -> Topology:
    """Check every structural rule of the directory tree.

    Returns the validated topology, or raises TopologyError listing every
    violation with the offending node or edge.
    """
    v: list[TopologyViolation] = []

    parent: dict[str, str] = {}
    seen_edges: set[tuple[str, str]] = set()
    for par, child in spec.edges:
        if (par, child) in seen_edges:
            continue
        seen_edges.add((par, child))
        missing = [n for n in (par, child) if n not in spec.nodes]
        if missing:
            for n in missing:
                v.append(TopologyViolation("unknown-node", f"{par}->{child}", f"edge references undeclared node {n!r}"))
            continue
        if child in parent:
            v.append(TopologyViolation("multiple-parents", child, f"has parents {parent[child]!r} and {par!r}"))
            continue
        parent[child] = par

    for node, kind in sorted(spec.nodes.items()):
        par = parent.get(node)
        if kind is LayerKind.TSD:
            if par is not None:
                v.append(TopologyViolation("tsd-with-parent", node, f"top-level node cannot have parent {par!r}"))
        elif par is None:
            v.append(TopologyViolation("missing-parent", node, f"{kind} node needs exactly one parent"))
        elif spec.nodes.get(par) is LayerKind.LSD:
            v.append(TopologyViolation("lsd-with-children", par, f"LSD cannot have children (edge {par}->{node})"))
        elif kind is LayerKind.LSD and spec.nodes.get(par) is not LayerKind.NSD:
            v.append(TopologyViolation("lsd-parent", node, f"LSD parent must be an NSD, got {spec.nodes.get(par)}"))

    # Cycle check: a parent chain must terminate (at a parentless node).
    for node in sorted(spec.nodes):
        seen = {node}
        cur = parent.get(node)
        while cur is not None:
            if cur in seen:
                v.append(TopologyViolation("cycle", node, "parent chain loops"))
                break
            seen.add(cur)
            cur = parent.get(cur)

    for node, kind in sorted(spec.nodes.items()):
        if kind is LayerKind.LSD:
            area = spec.lsd_coverage.get(node)
            if area is None:
                v.append(TopologyViolation("missing-coverage", node, "LSD has no coverage area"))
            elif area.is_empty:
                v.append(TopologyViolation("empty-coverage", node, "LSD coverage area must have positive area"))
    for node in sorted(spec.lsd_coverage):
        if spec.nodes.get(node) is not LayerKind.LSD:
            v.append(TopologyViolation("coverage-subject", node, "coverage area given for a non-LSD node"))

    for edge, lat in sorted(spec.latency.items()):
        if edge not in seen_edges:
            v.append(TopologyViolation("latency-subject", f"{edge[0]}->{edge[1]}", "latency given for a non-edge"))
        elif not isinstance(lat, int) or lat < 1:
            v.append(TopologyViolation("bad-latency", f"{edge[0]}->{edge[1]}", f"latency must be an integer >= 1, got {lat!r}"))

    if spec.tsd_peers is not None:
        actual = {n for n, k in spec.nodes.items() if k is LayerKind.TSD}
        if set(spec.tsd_peers) != actual:
            v.append(TopologyViolation("peer-set-mismatch", ",".join(sorted(spec.tsd_peers)), f"peer set must equal the TSD set {sorted(actual)}"))

    if v:
        raise TopologyError(v)
    return Topology(spec.nodes, parent, spec.lsd_coverage, spec.latency)
