"""Demand-driven strategy switching: per-service utilization over a
sliding window, and a hysteresis policy that promotes hot reactive
services to preemptive push (and demotes cold ones back).
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .model import LayerKind, PropagationStrategy


class DemandRecord(NamedTuple):
    """One descriptor returned to a customer: which service, at which
    LSD, at which tick. Internal escalation lookups are never recorded."""

    service_id: str
    lsd: str
    tick: int


@dataclass(frozen=True)
class UtilizationWindow:
    """Request counts for one service inside the trailing window
    (now - window_length, now], total and per LSD."""

    service_id: str
    window_length: int
    per_lsd: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.per_lsd.values())


def hotness(
    records: Iterable[DemandRecord], service_id: str, now: int, window_length: int
) -> UtilizationWindow:
    """Exact sliding-window count of customer demand for one service."""
    if window_length < 1:
        raise ValueError("window_length must be >= 1")
    counts: Counter[str] = Counter()
    lo = now - window_length
    for rec in records:
        if rec.service_id == service_id and lo < rec.tick <= now:
            counts[rec.lsd] += 1
    return UtilizationWindow(service_id, window_length, dict(counts))


@dataclass(frozen=True)
class SwitchPolicy:
    """Hysteresis thresholds, in requests per window. The gap between
    promote and demote plus the cooldown suppress flapping."""

    promote_threshold: int = 10
    demote_threshold: int = 2
    cooldown: int = 200

    def __post_init__(self) -> None:
        if self.promote_threshold <= self.demote_threshold:
            raise ValueError("promote_threshold must exceed demote_threshold")
        if self.cooldown < 0:
            raise ValueError("cooldown must be >= 0")


class SwitchDecision(enum.Enum):
    PROMOTE_TO_PPP = "PromoteToPPP"
    DEMOTE_TO_VRP = "DemoteToVRP"
    NO_CHANGE = "NoChange"

    def __str__(self) -> str:
        return self.value


def recommend(
    strategy: PropagationStrategy,
    origin_layer: LayerKind,
    hot: int,
    policy: SwitchPolicy,
    last_switch: int | None,
    now: int,
) -> SwitchDecision:
    """Decide whether a service's strategy should flip.

    LSD-registered services never switch (they have no propagation).
    Otherwise a reactive service hot enough gets promoted and a preemptive
    one cold enough gets demoted, provided the cooldown since the last
    switch has elapsed.
    """
    if origin_layer is LayerKind.LSD:
        return SwitchDecision.NO_CHANGE
    if last_switch is not None and now - last_switch < policy.cooldown:
        return SwitchDecision.NO_CHANGE
    if strategy is PropagationStrategy.VRP and hot >= policy.promote_threshold:
        return SwitchDecision.PROMOTE_TO_PPP
    if strategy is PropagationStrategy.PPP and hot <= policy.demote_threshold:
        return SwitchDecision.DEMOTE_TO_VRP
    return SwitchDecision.NO_CHANGE
