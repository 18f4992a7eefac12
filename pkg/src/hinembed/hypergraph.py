"""Per-relation buckets of hyperedges.

Each hyperedge starts life as one connected component of a single relation's
subgraph, so it encloses the complete single-relation neighborhood of every
node it contains. A bucket keeps its hyperedges ordered by (size, id) and
maintains the inverse incidence index node -> hyperedge ids.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from sortedcontainers import SortedList

from .concurrency import run_tasks
from .hin import HinGraph, relation_subgraph


@dataclass
class Hyperedge:
    id: int
    relation_tags: set[int]
    node_ids: set[int]
    active: bool = True

    @property
    def size(self) -> int:
        return len(self.node_ids)

    def sort_key(self) -> tuple[int, int]:
        return (len(self.node_ids), self.id)


@dataclass
class Bucket:
    """Ordered hyperedge collection owned by one worker at a time."""

    id: int
    _edges: dict[int, Hyperedge] = field(default_factory=dict)
    _order: SortedList = field(default_factory=SortedList)
    node_index: dict[int, set[int]] = field(default_factory=dict)

    def add(self, h: Hyperedge) -> None:
        self._edges[h.id] = h
        self._order.add(h.sort_key())
        for v in h.node_ids:
            self.node_index.setdefault(v, set()).add(h.id)

    def remove(self, h: Hyperedge) -> None:
        del self._edges[h.id]
        self._order.remove(h.sort_key())
        for v in h.node_ids:
            ids = self.node_index[v]
            ids.discard(h.id)
            if not ids:
                del self.node_index[v]

    def get(self, hyperedge_id: int) -> Hyperedge:
        return self._edges[hyperedge_id]

    def __len__(self) -> int:
        return len(self._edges)

    def __iter__(self):
        """Hyperedges ascending by (size, id)."""
        for _, hid in self._order:
            yield self._edges[hid]

    def hyperedges(self) -> list[Hyperedge]:
        return list(self)


def connected_components(edges) -> list[set[int]]:
    """Breadth-first components of an undirected edge list.

    Components are discovered from ascending node ids and returned sorted by
    (size descending, smallest member ascending) so the output is stable.
    """
    adj: dict[int, set[int]] = {}
    for u, v in edges:
        adj.setdefault(u, set())
        adj.setdefault(v, set())
        if u != v:
            adj[u].add(v)
            adj[v].add(u)

    seen: set[int] = set()
    components: list[set[int]] = []
    for start in sorted(adj):
        if start in seen:
            continue
        comp = {start}
        seen.add(start)
        frontier = deque([start])
        while frontier:
            node = frontier.popleft()
            for nxt in sorted(adj[node]):
                if nxt not in seen:
                    seen.add(nxt)
                    comp.add(nxt)
                    frontier.append(nxt)
        components.append(comp)
    components.sort(key=lambda c: (-len(c), min(c)))
    return components


def generate_hyperedges(g: HinGraph, max_workers: int = 1) -> list[Bucket]:
    """One bucket per relation with edges; one hyperedge per component.

    Component discovery runs as one task per relation; the merge assigns
    hyperedge ids relation-major so the result is identical for any worker
    count. Relations without edges are dropped.
    """
    relations = list(range(g.relation_count))
    per_relation = run_tasks(
        [lambda r=r: connected_components(relation_subgraph(g, r)) for r in relations],
        max_workers=max_workers,
    )

    buckets: list[Bucket] = []
    next_id = 0
    for r, comps in zip(relations, per_relation):
        if not comps:
            continue
        bucket = Bucket(id=r)
        for comp in comps:
            bucket.add(Hyperedge(id=next_id, relation_tags={r}, node_ids=set(comp)))
            next_id += 1
        buckets.append(bucket)
    return buckets


def bucket_stats(buckets: list[Bucket]) -> dict:
    """Component-count, largest-size, and mean-size summary."""
    sizes = [h.size for b in buckets for h in b]
    if not sizes:
        return {"count": 0, "largest": 0, "mean": 0.0}
    return {
        "count": len(sizes),
        "largest": max(sizes),
        "mean": sum(sizes) / len(sizes),
    }


def dump_hyperedges(buckets: list[Bucket], path) -> None:
    """Debug TSV: hyperedge_id, relation tags, node count, node ids."""
    with open(path, "w", encoding="utf-8") as fh:
        for b in sorted(buckets, key=lambda b: b.id):
            for h in b:
                rels = ",".join(str(r) for r in sorted(h.relation_tags))
                nodes = ",".join(str(v) for v in sorted(h.node_ids))
                fh.write(f"{h.id}\t{rels}\t{h.size}\t{nodes}\n")
