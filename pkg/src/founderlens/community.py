"""One-year community outcomes and interaction-network indicators.

Every window is half-open [start, end) on UTC-second timestamps. The year
mark opens 365 days after inception and spans a 30-day month; sustainability,
retention, size, engagement, and the network metrics are all read from that
window. Edges come from direct replies only: a comment links its author to
the parent document's author.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import ContractError, ValidationError
from .features import Document

logger = logging.getLogger(__name__)

DAY_SECONDS = 86400.0
YEAR_MARK_DAYS = 365
WINDOW_DAYS = 30


@dataclass(frozen=True)
class EventLog:
    """Time-sorted documents of one community."""

    community_id: str
    inception_ts: float
    events: tuple

    def __post_init__(self):
        for doc in self.events:
            if doc.community_id != self.community_id:
                raise ValidationError(
                    f"event by {doc.author_id!r} belongs to {doc.community_id!r}, "
                    f"not {self.community_id!r}"
                )
        times = [doc.timestamp for doc in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValidationError("event log must be time-sorted")
        if self.events and self.inception_ts > times[0]:
            raise ValidationError("inception must not postdate the first event")

    @classmethod
    def build(
        cls, community_id: str, documents: Iterable[Document], inception_ts: float | None = None
    ) -> "EventLog":
        """Sort and wrap; inception defaults to the first event's timestamp."""
        ordered = sorted(
            (d for d in documents),
            key=lambda d: (d.timestamp, d.author_id, d.kind, d.doc_id or ""),
        )
        if inception_ts is None:
            if not ordered:
                raise ValidationError(f"community {community_id!r} has no events and no inception")
            inception_ts = ordered[0].timestamp
        return cls(community_id=community_id, inception_ts=inception_ts, events=tuple(ordered))


def year_window(
    log: EventLog, year_mark_days: int = YEAR_MARK_DAYS, window_days: int = WINDOW_DAYS
) -> tuple[float, float]:
    start = log.inception_ts + year_mark_days * DAY_SECONDS
    return start, start + window_days * DAY_SECONDS


def _window_events(log: EventLog, window: tuple[float, float]):
    start, end = window
    return [doc for doc in log.events if start <= doc.timestamp < end]


def sustained(
    log: EventLog, year_mark_days: int = YEAR_MARK_DAYS, window_days: int = WINDOW_DAYS
) -> bool:
    """Any member activity in the year-mark window."""
    return bool(_window_events(log, year_window(log, year_mark_days, window_days)))


def founder_retention(
    founder_ids: Sequence[str],
    log: EventLog,
    year_mark_days: int = YEAR_MARK_DAYS,
    window_days: int = WINDOW_DAYS,
) -> float:
    """Fraction of founders with any activity in the year-mark window."""
    if not founder_ids:
        raise ValidationError("founder retention needs at least one founder")
    active = {doc.author_id for doc in _window_events(log, year_window(log, year_mark_days, window_days))}
    return sum(1 for f in founder_ids if f in active) / len(founder_ids)


def community_size(
    log: EventLog, year_mark_days: int = YEAR_MARK_DAYS, window_days: int = WINDOW_DAYS
) -> int:
    """Distinct authors in the year-mark window; only defined when sustained."""
    events = _window_events(log, year_window(log, year_mark_days, window_days))
    if not events:
        raise ContractError("community_size requires a sustained community")
    return len({doc.author_id for doc in events})


def engagement(
    log: EventLog, year_mark_days: int = YEAR_MARK_DAYS, window_days: int = WINDOW_DAYS
) -> float:
    """(posts + comments) per active member in the year-mark window."""
    events = _window_events(log, year_window(log, year_mark_days, window_days))
    size = len({doc.author_id for doc in events})
    if size == 0:
        raise ContractError("engagement requires at least one active member")
    return len(events) / size


@dataclass(frozen=True)
class InteractionGraph:
    """Undirected reply graph: nodes sorted, edges deduplicated with a < b."""

    nodes: tuple
    edges: tuple
    skipped_replies: int = 0

    def __post_init__(self):
        node_set = set(self.nodes)
        for a, b in self.edges:
            if a == b:
                raise ValidationError(f"self-loop on {a!r}")
            if not (a < b):
                raise ValidationError(f"edge ({a!r}, {b!r}) not in canonical order")
            if a not in node_set or b not in node_set:
                raise ValidationError(f"edge endpoint missing from nodes: ({a!r}, {b!r})")
        if len(set(self.edges)) != len(self.edges):
            raise ValidationError("duplicate edges")

    def n_nodes(self) -> int:
        return len(self.nodes)

    def adjacency(self) -> dict:
        adj: dict[str, set] = {node: set() for node in self.nodes}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def build_interaction_graph(
    log: EventLog, window: tuple[float, float] | None = None
) -> InteractionGraph:
    """Reply edges among window-active users.

    A reply whose parent cannot be found in the log is skipped and counted;
    parent authors outside the window still become nodes so that every edge
    endpoint is present.
    """
    if window is None:
        window = year_window(log)
    by_id = {doc.doc_id: doc for doc in log.events if doc.doc_id is not None}
    events = _window_events(log, window)
    nodes = {doc.author_id for doc in events}
    edges = set()
    skipped = 0
    for doc in events:
        if doc.kind != "comment":
            continue
        parent = by_id.get(doc.parent_id)
        if parent is None:
            skipped += 1
            continue
        if parent.author_id == doc.author_id:
            continue
        nodes.add(parent.author_id)
        edge = tuple(sorted((doc.author_id, parent.author_id)))
        edges.add(edge)
    if skipped:
        logger.info("community %s: %d replies had unresolvable parents", log.community_id, skipped)
    return InteractionGraph(
        nodes=tuple(sorted(nodes)), edges=tuple(sorted(edges)), skipped_replies=skipped
    )


def average_degree(graph: InteractionGraph) -> tuple[float, float | None] | None:
    """(mean distinct-neighbor count, its natural log).

    None for an empty graph; the log is None when there are no edges, so the
    transformed metric is reported absent rather than faked with log(1+x).
    """
    if graph.n_nodes() == 0:
        return None
    adj = graph.adjacency()
    avg = sum(len(adj[v]) for v in graph.nodes) / graph.n_nodes()
    return avg, (math.log(avg) if avg > 0 else None)


def _bfs_distances(adj: Mapping, source: str) -> dict:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def connected_components(graph: InteractionGraph) -> list:
    """Components as sorted node lists, ordered by size desc then first node."""
    adj = graph.adjacency()
    seen = set()
    components = []
    for node in graph.nodes:
        if node in seen:
            continue
        members = sorted(_bfs_distances(adj, node))
        seen.update(members)
        components.append(members)
    components.sort(key=lambda c: (-len(c), c[0]))
    return components


def count_components(graph: InteractionGraph) -> int:
    """Connected components; isolated users count as singletons."""
    return len(connected_components(graph))


def diameter(graph: InteractionGraph) -> int:
    """Longest shortest path within the largest component (0 when edgeless)."""
    if not graph.edges:
        return 0
    adj = graph.adjacency()
    largest = connected_components(graph)[0]
    best = 0
    for node in largest:
        dist = _bfs_distances(adj, node)
        best = max(best, max(dist.values()))
    return best


def degree_centralization(graph: InteractionGraph) -> float | None:
    """Freeman degree centralization; undefined below 3 nodes."""
    n = graph.n_nodes()
    if n < 3:
        return None
    adj = graph.adjacency()
    degrees = [len(adj[v]) for v in graph.nodes]
    d_max = max(degrees)
    return sum(d_max - d for d in degrees) / ((n - 1) * (n - 2))


def closeness_centralization(graph: InteractionGraph) -> float | None:
    """Freeman closeness centralization; needs a connected graph on ≥3 nodes."""
    n = graph.n_nodes()
    if n < 3:
        return None
    adj = graph.adjacency()
    # geodesics are integers, so exact rationals keep the star at exactly 1.0
    closeness = []
    for node in graph.nodes:
        dist = _bfs_distances(adj, node)
        if len(dist) < n:
            return None
        closeness.append(Fraction(n - 1, sum(dist.values())))
    c_max = max(closeness)
    total = sum(c_max - c for c in closeness)
    return float(total / (Fraction((n - 1) * (n - 2), 2 * n - 3)))


@dataclass(frozen=True)
class CommunityOutcomes:
    """Year-mark outcomes; fields are None when the metric is undefined."""

    community_id: str
    sustained: bool
    founder_retention: float
    size: int | None = None
    engagement: float | None = None
    avg_degree: float | None = None
    log_avg_degree: float | None = None
    diameter: int | None = None
    n_components: int | None = None
    degree_centralization: float | None = None
    closeness_centralization: float | None = None
    replies_skipped: int = 0

    def __post_init__(self):
        if not 0.0 <= self.founder_retention <= 1.0:
            raise ValidationError("founder_retention out of [0,1]")
        if not self.sustained:
            gated = (
                self.size,
                self.engagement,
                self.avg_degree,
                self.log_avg_degree,
                self.diameter,
                self.n_components,
                self.degree_centralization,
                self.closeness_centralization,
            )
            if any(v is not None for v in gated):
                raise ValidationError("unsustained community must not carry window metrics")


def compute_outcomes(
    log: EventLog,
    founder_ids: Sequence[str],
    year_mark_days: int = YEAR_MARK_DAYS,
    window_days: int = WINDOW_DAYS,
) -> CommunityOutcomes:
    """Assemble the full outcome row for one community."""
    retention = founder_retention(founder_ids, log, year_mark_days, window_days)
    if not sustained(log, year_mark_days, window_days):
        return CommunityOutcomes(
            community_id=log.community_id, sustained=False, founder_retention=retention
        )
    window = year_window(log, year_mark_days, window_days)
    graph = build_interaction_graph(log, window)
    deg = average_degree(graph)
    avg, log_avg = deg if deg is not None else (None, None)
    return CommunityOutcomes(
        community_id=log.community_id,
        sustained=True,
        founder_retention=retention,
        size=community_size(log, year_mark_days, window_days),
        engagement=engagement(log, year_mark_days, window_days),
        avg_degree=avg,
        log_avg_degree=log_avg,
        diameter=diameter(graph),
        n_components=count_components(graph),
        degree_centralization=degree_centralization(graph),
        closeness_centralization=closeness_centralization(graph),
        replies_skipped=graph.skipped_replies,
    )
