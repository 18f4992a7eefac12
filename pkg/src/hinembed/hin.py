"""Typed multi-relational graph: loading, validation, subnetwork induction.

Node, node-type, relation, and label identifiers in the input files are
arbitrary strings; they are interned to dense integers in first-appearance
order so that everything downstream indexes by int. The original strings are
kept for writing outputs.

Edges are treated as undirected for all structural purposes (components,
adjacency, neighborhoods); the stored (src, dst) orientation is preserved so
the link-prediction split can reproduce the input file.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    DanglingFeature,
    DanglingLabel,
    EmptyGraph,
    MalformedLine,
    UnknownNode,
    UnknownRelation,
)

DEFAULT_FALLBACK_DIM = 64


@dataclass
class HinGraph:
    """In-memory heterogeneous network. Immutable after construction."""

    nodes: dict[int, int]                      # node id -> node type id
    edges: list[tuple[int, int, int]]          # (src, dst, relation)
    features: dict[int, np.ndarray] | None
    labels: dict[int, set[int]] | None
    relation_count: int
    node_type_count: int
    node_names: list[str] = field(default_factory=list)
    type_names: list[str] = field(default_factory=list)
    relation_names: list[str] = field(default_factory=list)
    label_names: list[str] = field(default_factory=list)

    # derived indexes, built once in finalize()
    edges_by_rel: list[list[tuple[int, int]]] = field(default_factory=list, repr=False)
    neighbors_by_rel: list[dict[int, set[int]]] = field(default_factory=list, repr=False)
    neighbors_all: dict[int, set[int]] = field(default_factory=dict, repr=False)

    def finalize(self) -> "HinGraph":
        """Build the per-relation and global adjacency indexes."""
        self.edges_by_rel = [[] for _ in range(self.relation_count)]
        self.neighbors_by_rel = [{} for _ in range(self.relation_count)]
        self.neighbors_all = {v: set() for v in self.nodes}
        for src, dst, rel in self.edges:
            self.edges_by_rel[rel].append((src, dst))
            nbr = self.neighbors_by_rel[rel]
            if src != dst:
                nbr.setdefault(src, set()).add(dst)
                nbr.setdefault(dst, set()).add(src)
                self.neighbors_all[src].add(dst)
                self.neighbors_all[dst].add(src)
        return self

    @property
    def feature_dim(self) -> int | None:
        if not self.features:
            return None
        return len(next(iter(self.features.values())))

    def node_name(self, v: int) -> str:
        return self.node_names[v] if self.node_names else str(v)

    def isolated_nodes(self) -> list[int]:
        """Nodes with no edge in any relation (self-edges do not count)."""
        return sorted(v for v, nbrs in self.neighbors_all.items() if not nbrs)


@dataclass
class NeighborhoodSet:
    """First-order neighbors of one node under one relation."""

    node: int
    relation: int
    neighbors: set[int]


@dataclass
class Partition:
    """A node subset with its induced multi-relational structure.

    ``adjacency`` is sparse symmetric 0/1 over local indices with a 1 on
    every diagonal entry; ``features`` is dense, one row per node.
    """

    id: int
    node_ids: list[int]                        # sorted ascending
    local_index: dict[int, int]
    adjacency: sp.csr_matrix
    features: np.ndarray
    origin_relations: set[int] = field(default_factory=set)

    @property
    def size(self) -> int:
        return len(self.node_ids)


# --- loading ---------------------------------------------------------------


class _Interner:
    def __init__(self):
        self.ids: dict[str, int] = {}
        self.names: list[str] = []

    def intern(self, name: str) -> int:
        idx = self.ids.get(name)
        if idx is None:
            idx = len(self.names)
            self.ids[name] = idx
            self.names.append(name)
        return idx

    def get(self, name: str) -> int | None:
        return self.ids.get(name)


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            yield line_no, line


def load_hin(edge_path, feature_path=None, label_path=None) -> HinGraph:
    """Parse TSV edge/feature/label files into a validated HinGraph.

    Edge lines: ``src_id  src_type  rel_type  dst_id  dst_type`` (tabs).
    Duplicate (src, dst, rel) triples are dropped. Raises EmptyGraph when no
    edge survives, MalformedLine on bad rows, DanglingFeature/DanglingLabel
    when a feature or label names a node absent from the edge file.
    """
    nodes = _Interner()
    types = _Interner()
    rels = _Interner()
    node_type: dict[int, int] = {}
    edges: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()

    for line_no, line in _data_lines(edge_path):
        parts = line.split("\t")
        if len(parts) != 5:
            raise MalformedLine(edge_path, line_no, f"expected 5 tab-separated fields, got {len(parts)}")
        src_id, src_type, rel_type, dst_id, dst_type = parts
        src = nodes.intern(src_id)
        node_type[src] = types.intern(src_type)
        rel = rels.intern(rel_type)
        dst = nodes.intern(dst_id)
        node_type[dst] = types.intern(dst_type)
        triple = (src, dst, rel)
        if triple in seen:
            continue
        seen.add(triple)
        edges.append(triple)

    if not edges:
        raise EmptyGraph(f"no edges in {edge_path}")

    features = None
    if feature_path is not None:
        features = {}
        dim = None
        for line_no, line in _data_lines(feature_path):
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedLine(feature_path, line_no, "expected node_id<TAB>comma-joined floats")
            node = nodes.get(parts[0])
            if node is None:
                raise DanglingFeature(parts[0])
            try:
                vec = np.array([float(x) for x in parts[1].split(",")], dtype=np.float64)
            except ValueError as exc:
                raise MalformedLine(feature_path, line_no, str(exc)) from exc
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise MalformedLine(feature_path, line_no, f"feature dim {vec.size} != {dim}")
            features[node] = vec

    labels = None
    label_names = []
    if label_path is not None:
        labels = {}
        label_interner = _Interner()
        for line_no, line in _data_lines(label_path):
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedLine(label_path, line_no, "expected node_id<TAB>label")
            node = nodes.get(parts[0])
            if node is None:
                raise DanglingLabel(parts[0])
            labels.setdefault(node, set()).add(label_interner.intern(parts[1]))
        label_names = label_interner.names

    g = HinGraph(
        nodes=node_type,
        edges=edges,
        features=features,
        labels=labels,
        relation_count=len(rels.names),
        node_type_count=len(types.names),
        node_names=nodes.names,
        type_names=types.names,
        relation_names=rels.names,
        label_names=label_names,
    )
    return g.finalize()


def save_hin(g: HinGraph, edge_path, feature_path=None, label_path=None) -> None:
    """Write a graph back out in the load_hin file formats.

    Edges are written in stored order, so a reload re-interns every id to the
    same dense integer.
    """
    with open(edge_path, "w", encoding="utf-8") as fh:
        for src, dst, rel in g.edges:
            fh.write(
                f"{g.node_name(src)}\t{g.type_names[g.nodes[src]]}\t"
                f"{g.relation_names[rel]}\t{g.node_name(dst)}\t{g.type_names[g.nodes[dst]]}\n"
            )
    if feature_path is not None and g.features is not None:
        with open(feature_path, "w", encoding="utf-8") as fh:
            for node in sorted(g.features):
                row = ",".join(format(x, ".17g") for x in g.features[node])
                fh.write(f"{g.node_name(node)}\t{row}\n")
    if label_path is not None and g.labels is not None:
        with open(label_path, "w", encoding="utf-8") as fh:
            for node in sorted(g.labels):
                for lab in sorted(g.labels[node]):
                    fh.write(f"{g.node_name(node)}\t{g.label_names[lab]}\n")


# --- structural queries ------------------------------------------------------


def _check_relation(g: HinGraph, r: int) -> None:
    if not (0 <= r < g.relation_count):
        raise UnknownRelation(r)


def relation_subgraph(g: HinGraph, r: int) -> list[tuple[int, int]]:
    """All stored edges carrying relation r, original orientation."""
    _check_relation(g, r)
    return list(g.edges_by_rel[r])


def neighborhood(g: HinGraph, v: int, r: int) -> NeighborhoodSet:
    """Nodes joined to v by an r-edge in either direction, excluding v."""
    if v not in g.nodes:
        raise UnknownNode(v)
    _check_relation(g, r)
    return NeighborhoodSet(node=v, relation=r, neighbors=set(g.neighbors_by_rel[r].get(v, ())))


def _hash32(i: int) -> int:
    # Knuth multiplicative hash; spreads contiguous local indices.
    return (i * 2654435761) & 0xFFFFFFFF


def fallback_features(n: int, dim: int) -> np.ndarray:
    """One-hot of local index, hashed into dim columns when n exceeds dim."""
    x = np.zeros((n, dim), dtype=np.float64)
    if n <= dim:
        x[np.arange(n), np.arange(n)] = 1.0
    else:
        for i in range(n):
            x[i, _hash32(i) % dim] = 1.0
    return x


def induce_partition(
    g: HinGraph,
    node_ids,
    id: int,
    origin_relations: set[int] | None = None,
    fallback_dim: int = DEFAULT_FALLBACK_DIM,
) -> Partition:
    """Induce the all-relations subnetwork over node_ids.

    The adjacency has a 1 at (i, j) iff the two nodes share at least one edge
    of any relation, plus self-loops. Features are copied row-wise; when the
    graph has none, a one-hot of the local index (hashed above fallback_dim)
    stands in.
    """
    members = sorted(set(node_ids))
    for v in members:
        if v not in g.nodes:
            raise UnknownNode(v)
    local = {v: i for i, v in enumerate(members)}
    n = len(members)

    rows = list(range(n))
    cols = list(range(n))
    member_set = local.keys()
    for v in members:
        vi = local[v]
        for u in g.neighbors_all[v]:
            if u in member_set:
                rows.append(vi)
                cols.append(local[u])
    data = np.ones(len(rows), dtype=np.float64)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    adj.data[:] = 1.0  # collapse duplicates from coo summation

    if g.features:
        dim = g.feature_dim
        feats = np.zeros((n, dim), dtype=np.float64)
        for v, i in local.items():
            vec = g.features.get(v)
            if vec is not None:
                feats[i] = vec
    else:
        feats = fallback_features(n, fallback_dim)

    return Partition(
        id=id,
        node_ids=members,
        local_index=local,
        adjacency=adj,
        features=feats,
        origin_relations=set(origin_relations or ()),
    )
