"""Run metrics: lookup outcomes, cache behaviour, message counts by kind
and layer crossing, deletion staleness, and strategy-switch activity.

The accumulator is filled by the event loop; ``build_report`` freezes it
into a JSON-ready dict whose layout is deterministic, so identical runs
produce byte-identical reports.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .model import LayerKind

LAYER_ORDER = (LayerKind.TSD, LayerKind.NSD, LayerKind.LSD)


@dataclass
class MetricsAccumulator:
    customer_lookups: int = 0
    served_locally: int = 0
    escalated: int = 0
    resolved_remotely: int = 0
    unresolved: int = 0

    lookups_by_layer: Counter = field(default_factory=Counter)  # layer name -> directory lookups run
    cache_hits: Counter = field(default_factory=Counter)  # lsd -> customer lookups answered locally
    cache_misses: Counter = field(default_factory=Counter)
    refreshes: Counter = field(default_factory=Counter)  # node -> volatile refreshes applied

    messages_sent: int = 0
    messages_delivered: int = 0
    sent_by_kind: Counter = field(default_factory=Counter)
    sent_by_crossing: Counter = field(default_factory=Counter)  # "NSD->LSD" -> count
    sent_by_layer: Counter = field(default_factory=Counter)
    received_by_layer: Counter = field(default_factory=Counter)

    stores: Counter = field(default_factory=Counter)  # StoreOutcome value -> count
    rejected: Counter = field(default_factory=Counter)  # error code -> count

    deletions: dict[str, int] = field(default_factory=dict)  # service -> deregistration tick
    last_answer: dict[str, int] = field(default_factory=dict)  # service -> last tick served to a customer

    demand: Counter = field(default_factory=Counter)  # (service, lsd) -> customer demand
    switch_events: list[tuple[int, str, str]] = field(default_factory=list)
    peer_rounds: int = 0
    peer_merges: int = 0

    def count_message(self, kind: str, from_layer: LayerKind, to_layer: LayerKind) -> None:
        self.messages_sent += 1
        self.sent_by_kind[kind] += 1
        self.sent_by_crossing[f"{from_layer}->{to_layer}"] += 1
        self.sent_by_layer[str(from_layer)] += 1

    def requests_to_layer(self, layer: LayerKind) -> int:
        return sum(
            n for key, n in self.sent_by_crossing.items() if key.endswith(f"->{layer}") and key.startswith("Request:") is False and False
        )

    def build_report(self, clock: int, pending_messages: int) -> dict:
        per_layer = {}
        for layer in LAYER_ORDER:
            name = str(layer)
            per_layer[name] = {
                "lookups": self.lookups_by_layer.get(name, 0),
                "messages_sent": self.sent_by_layer.get(name, 0),
                "messages_received": self.received_by_layer.get(name, 0),
            }
        demand = {}
        for (svc, lsd), n in sorted(self.demand.items()):
            demand.setdefault(svc, {})[lsd] = n
        staleness = []
        for svc, tick in sorted(self.deletions.items()):
            last = self.last_answer.get(svc)
            delta = last - tick if last is not None and last > tick else 0
            staleness.append({"service_id": svc, "deleted_at": tick, "stale_ticks": delta})
        promotions = Counter(svc for _, svc, kind in self.switch_events if kind == "PromoteToPPP")
        demotions = Counter(svc for _, svc, kind in self.switch_events if kind == "DemoteToVRP")
        return {
            "clock": clock,
            "customer_lookups": {
                "total": self.customer_lookups,
                "served_locally": self.served_locally,
                "escalated": self.escalated,
                "resolved_remotely": self.resolved_remotely,
                "unresolved": self.unresolved,
            },
            "per_layer": per_layer,
            "cache": {
                lsd: {
                    "hits": self.cache_hits.get(lsd, 0),
                    "misses": self.cache_misses.get(lsd, 0),
                    "refreshes": self.refreshes.get(lsd, 0),
                }
                for lsd in sorted(set(self.cache_hits) | set(self.cache_misses) | set(self.refreshes))
            },
            "messages": {
                "sent": self.messages_sent,
                "delivered": self.messages_delivered,
                "in_flight": pending_messages,
                "by_kind": dict(sorted(self.sent_by_kind.items())),
                "by_crossing": dict(sorted(self.sent_by_crossing.items())),
            },
            "requests_to_tsd": self.sent_by_crossing.get("NSD->TSD", 0) and self._requests_to_tsd(),
            "stores": dict(sorted(self.stores.items())),
            "rejected": dict(sorted(self.rejected.items())),
            "staleness": staleness,
            "switches": {
                "events": [[t, svc, kind] for t, svc, kind in self.switch_events],
                "promotions": dict(sorted(promotions.items())),
                "demotions": dict(sorted(demotions.items())),
            },
            "demand": demand,
            "peer_sync": {"rounds": self.peer_rounds, "merges": self.peer_merges},
        }

    def _requests_to_tsd(self) -> int:
        return self.requests_to_tsd

    @property
    def requests_to_tsd(self) -> int:
        return self.request_arrivals.get(str(LayerKind.TSD), 0)

    request_arrivals: Counter = field(default_factory=Counter)  # layer name -> Request deliveries


def check_report(report: dict) -> list[str]:
    """Conservation identities every emitted report must satisfy."""
    problems = []
    cl = report["customer_lookups"]
    if cl["served_locally"] + cl["escalated"] != cl["total"]:
        problems.append("served_locally + escalated != total customer lookups")
    if cl["resolved_remotely"] + cl["unresolved"] != cl["escalated"]:
        problems.append("resolved_remotely + unresolved != escalated")
    msgs = report["messages"]
    if msgs["delivered"] + msgs["in_flight"] != msgs["sent"]:
        problems.append("delivered + in_flight != sent")
    if sum(msgs["by_kind"].values()) != msgs["sent"]:
        problems.append("by_kind does not sum to sent")
    if sum(msgs["by_crossing"].values()) != msgs["sent"]:
        problems.append("by_crossing does not sum to sent")
    hits = sum(v["hits"] for v in report["cache"].values())
    misses = sum(v["misses"] for v in report["cache"].values())
    if hits != cl["served_locally"] or misses != cl["escalated"]:
        problems.append("per-LSD cache hits/misses disagree with lookup totals")
    return problems
