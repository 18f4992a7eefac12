"""Binary-tree bucket contraction into bounded partitions plus anchor network.

Buckets are contracted pairwise (ascending bucket id, odd one passes through)
until one remains; hyperedges merge greedily by node overlap, never past the
upper bound. Leftovers below the lower bound are shuffled and packed. Every
original single-relation component survives intact inside some partition,
which is what preserves each node's complete single-relation neighborhood.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .concurrency import run_tasks
from .errors import DegenerateDenominator, NoBuckets, NoCrossPartitionNodes
from .hin import DEFAULT_FALLBACK_DIM, HinGraph, Partition, induce_partition
from .hypergraph import Bucket, Hyperedge

log = logging.getLogger(__name__)


@dataclass
class PartitionBounds:
    """Node-count window for contracted hyperedges; 0 < lower <= upper."""

    lower: int = 200
    upper: int = 800

    def __post_init__(self):
        if not (0 < self.lower <= self.upper):
            raise ValueError(f"invalid bounds [{self.lower}, {self.upper}]")


# Bounds used in the original large-scale experiments; the defaults above
# are sized for desk-scale data.
PAPER_SCALE_BOUNDS = PartitionBounds(lower=10_000, upper=40_000)


@dataclass
class AnchorNetwork:
    """Subnetwork of nodes shared across partitions plus their neighbors."""

    node_ids: list[int]
    local_index: dict[int, int]
    adjacency: sp.csr_matrix
    features: np.ndarray
    membership: dict[int, set[int]]        # node -> partitions containing it
    anchor_ids: list[int]                  # the selected seed nodes

    @property
    def size(self) -> int:
        return len(self.node_ids)


def score_and_match(h: Hyperedge, target: Bucket) -> int | None:
    """Id of the active target hyperedge sharing the most nodes with h.

    Overlap is counted through the target's node index; ties break toward
    the smaller hyperedge, then the smaller id. None when nothing overlaps.
    """
    counts: dict[int, int] = {}
    for v in h.node_ids:
        for hid in target.node_index.get(v, ()):
            counts[hid] = counts.get(hid, 0) + 1
    best = None
    best_key = None
    for hid, common in counts.items():
        cand = target.get(hid)
        if not cand.active:
            continue
        key = (-common, cand.size, hid)
        if best_key is None or key < best_key:
            best_key = key
            best = hid
    return best


def _copy_edge(h: Hyperedge, active: bool) -> Hyperedge:
    return Hyperedge(id=h.id, relation_tags=set(h.relation_tags), node_ids=set(h.node_ids), active=active)


def contract_buckets(b1: Bucket, b2: Bucket, bounds: PartitionBounds) -> Bucket:
    """Contract b1's hyperedges into b2, smallest first.

    Each active hyperedge of b1 merges with its best-overlap active match in
    the evolving target when the union stays within bounds.upper; otherwise
    it passes through unmerged. Hyperedges already larger than the upper
    bound are deactivated and never considered again.
    """
    target = Bucket(id=min(b1.id, b2.id))
    for h in b2:
        target.add(_copy_edge(h, active=h.active and h.size <= bounds.upper))

    passed: list[Hyperedge] = []
    for h in b1.hyperedges():                      # snapshot, ascending (size, id)
        if not h.active or h.size > bounds.upper:
            passed.append(_copy_edge(h, active=False if h.size > bounds.upper else h.active))
            continue
        match_id = score_and_match(h, target)
        if match_id is None:
            passed.append(_copy_edge(h, active=True))
            continue
        m = target.get(match_id)
        union = h.node_ids | m.node_ids
        if len(union) > bounds.upper:
            passed.append(_copy_edge(h, active=True))
            continue
        target.remove(m)
        target.add(Hyperedge(id=min(h.id, m.id), relation_tags=h.relation_tags | m.relation_tags, node_ids=union))

    for h in passed:
        target.add(h)
    return target


def _pack_small(final: Bucket, bounds: PartitionBounds, seed) -> list[Hyperedge]:
    """Shuffle sub-lower-bound hyperedges and greedily pack them together."""
    small = [h for h in final if h.size < bounds.lower]
    big = [h for h in final if h.size >= bounds.lower]
    if not small:
        return big

    rng = np.random.default_rng(seed)
    order = sorted(small, key=lambda h: h.id)
    order = [order[i] for i in rng.permutation(len(order))]

    groups: list[list[Hyperedge]] = []
    current: list[Hyperedge] = []
    nodes: set[int] = set()
    for h in order:
        if current and len(nodes | h.node_ids) > bounds.upper:
            groups.append(current)
            current, nodes = [], set()
        current.append(h)
        nodes |= h.node_ids
        if len(nodes) >= bounds.lower:
            groups.append(current)
            current, nodes = [], set()
    if current:
        # fold a trailing under-sized group into the smallest packed group
        # that still fits, otherwise keep it on its own
        trail = set().union(*(h.node_ids for h in current))
        host = None
        for grp in sorted(groups, key=lambda grp: len(set().union(*(h.node_ids for h in grp)))):
            if len(trail | set().union(*(h.node_ids for h in grp))) <= bounds.upper:
                host = grp
                break
        if host is not None:
            host.extend(current)
        else:
            groups.append(current)

    merged = []
    for grp in groups:
        merged.append(
            Hyperedge(
                id=min(h.id for h in grp),
                relation_tags=set().union(*(h.relation_tags for h in grp)),
                node_ids=set().union(*(h.node_ids for h in grp)),
            )
        )
    return big + merged


def partition(
    g: HinGraph,
    buckets: list[Bucket],
    bounds: PartitionBounds,
    seed,
    max_workers: int = 1,
    fallback_dim: int = DEFAULT_FALLBACK_DIM,
) -> list[Partition]:
    """Contract all buckets down to one, then induce bounded partitions.

    Rounds pair buckets by ascending id (an odd bucket passes through), so
    bucket count halves each round. After the final round, hyperedges below
    bounds.lower are packed together under a seeded shuffle. Isolated nodes
    of g are appended to the smallest partition.
    """
    work = sorted((b for b in buckets if len(b) > 0), key=lambda b: b.id)
    if not work:
        raise NoBuckets("no non-empty buckets to partition")

    while len(work) > 1:
        pairs = [(work[i], work[i + 1]) for i in range(0, len(work) - 1, 2)]
        jobs = [lambda a=a, b=b: contract_buckets(a, b, bounds) for a, b in pairs]
        merged = run_tasks(jobs, max_workers=max_workers)
        if len(work) % 2:
            merged.append(work[-1])
        work = merged  # contraction keeps min id, so ascending order holds

    finals = _pack_small(work[0], bounds, seed)
    finals.sort(key=lambda h: (h.size, h.id))

    member_sets = [set(h.node_ids) for h in finals]
    isolated = g.isolated_nodes()
    if isolated:
        smallest = min(range(len(finals)), key=lambda i: (len(member_sets[i]), finals[i].id))
        member_sets[smallest].update(isolated)

    jobs = [
        lambda i=i: induce_partition(
            g, member_sets[i], i, origin_relations=finals[i].relation_tags, fallback_dim=fallback_dim
        )
        for i in range(len(finals))
    ]
    return run_tasks(jobs, max_workers=max_workers)


def extract_anchor_network(
    g: HinGraph,
    partitions: list[Partition],
    bounds: PartitionBounds,
    fallback_dim: int = DEFAULT_FALLBACK_DIM,
) -> AnchorNetwork:
    """Top cross-partition nodes per partition plus their first-order hoods.

    Candidates are nodes living in two or more partitions or touching another
    partition through an edge, ranked by cross-partition degree. Per-partition
    k is the largest value keeping the induced anchor network within
    bounds.upper, but never below 1. Raises NoCrossPartitionNodes when the
    partitions are fully disconnected from each other.
    """
    membership: dict[int, set[int]] = {}
    for p in partitions:
        for v in p.node_ids:
            membership.setdefault(v, set()).add(p.id)

    ranked: list[list[int]] = []
    for p in partitions:
        cands = []
        for v in p.node_ids:
            cross_deg = sum(
                1 for u in g.neighbors_all[v] if membership.get(u, set()) - {p.id}
            )
            if cross_deg > 0 or len(membership.get(v, ())) >= 2:
                cands.append((-cross_deg, v))
        cands.sort()
        ranked.append([v for _, v in cands])

    if not any(ranked):
        raise NoCrossPartitionNodes("partitions share no nodes and no edges")

    def network_nodes(k: int) -> set[int]:
        anchors = set()
        for cands in ranked:
            anchors.update(cands[:k])
        nodes = set(anchors)
        for a in anchors:
            nodes.update(g.neighbors_all[a])
        return nodes

    max_k = max(len(c) for c in ranked)
    best_k = 1
    for k in range(2, max_k + 1):
        if len(network_nodes(k)) <= bounds.upper:
            best_k = k
        else:
            break

    anchors = sorted(set().union(*(c[:best_k] for c in ranked)))
    nodes = network_nodes(best_k)
    body = induce_partition(g, nodes, id=-1, fallback_dim=fallback_dim)
    return AnchorNetwork(
        node_ids=body.node_ids,
        local_index=body.local_index,
        adjacency=body.adjacency,
        features=body.features,
        membership={v: set(membership.get(v, ())) for v in body.node_ids},
        anchor_ids=anchors,
    )


def avg_neighborhood_loss(g: HinGraph, partitions) -> float:
    """Percentage of first-order neighborhood lost by the partitioning.

    For every (partition, node, relation) occurrence the numerator counts the
    node's relation-neighbors missing from that partition; the denominator is
    the total neighborhood size over the whole graph minus the node count.
    The metric can exceed 100 when nodes occur in many partitions; it is
    reported as defined.
    """
    denom = sum(
        len(nbrs) for rel in g.neighbors_by_rel for nbrs in rel.values()
    ) - len(g.nodes)
    if denom <= 0:
        raise DegenerateDenominator(f"denominator {denom} is not positive")

    num = 0
    for p in partitions:
        members = set(p.node_ids) if hasattr(p, "node_ids") else set(p)
        for v in members:
            for rel in g.neighbors_by_rel:
                nbrs = rel.get(v)
                if nbrs:
                    num += len(nbrs - members)
    return 100.0 * num / denom


# --- manifests ---------------------------------------------------------------


def write_partition_manifest(g: HinGraph, partitions, path) -> None:
    """TSV rows: partition_id, node_count, origin relations, node names."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in sorted(partitions, key=lambda p: p.id):
            origins = ",".join(str(r) for r in sorted(getattr(p, "origin_relations", ()))) or "-"
            names = ",".join(g.node_name(v) for v in p.node_ids)
            fh.write(f"{p.id}\t{len(p.node_ids)}\t{origins}\t{names}\n")


def write_anchor_manifest(g: HinGraph, anchors: AnchorNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        names = ",".join(g.node_name(v) for v in anchors.node_ids)
        fh.write(f"-1\t{len(anchors.node_ids)}\t-\t{names}\n")


def read_manifest_node_sets(g: HinGraph, path) -> list[set[int]]:
    """Node-id sets per manifest row, resolving names through the graph."""
    name_to_id = {name: i for i, name in enumerate(g.node_names)}
    sets = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            _, _, _, names = line.split("\t")
            sets.append({name_to_id[n] for n in names.split(",") if n})
    return sets
