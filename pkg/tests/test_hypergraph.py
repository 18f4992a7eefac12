import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hinembed.datagen import build_graph, random_hin
from hinembed.hypergraph import (
    Bucket,
    Hyperedge,
    bucket_stats,
    connected_components,
    dump_hyperedges,
    generate_hyperedges,
)


class UnionFind:
    """Independent oracle for component structure."""

    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def components(self):
        groups = {}
        for x in self.parent:
            groups.setdefault(self.find(x), set()).add(x)
        return sorted(groups.values(), key=lambda c: (-len(c), min(c)))


def uf_components(edges):
    uf = UnionFind()
    for u, v in edges:
        uf.find(u)
        uf.find(v)
        uf.union(u, v)
    return uf.components()


def test_components_simple():
    assert connected_components([(1, 2), (2, 3), (4, 5)]) == [{1, 2, 3}, {4, 5}]


def test_components_empty():
    assert connected_components([]) == []


def test_components_ordering():
    comps = connected_components([(1, 2), (3, 4), (10, 11), (11, 12)])
    assert comps == [{10, 11, 12}, {1, 2}, {3, 4}]


def test_components_vs_union_find_oracle():
    rng = np.random.default_rng(42)
    for trial in range(20):
        n_edges = int(rng.integers(1, 1000))
        n_nodes = int(rng.integers(2, 400))
        edges = [tuple(rng.integers(0, n_nodes, size=2)) for _ in range(n_edges)]
        assert connected_components(edges) == uf_components(edges)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), max_size=120))
def test_components_property(edges):
    comps = connected_components(edges)
    assert comps == uf_components(edges)
    covered = set().union(*comps) if comps else set()
    assert covered == {v for e in edges for v in e}
    for a in comps:
        for b in comps:
            if a is not b:
                assert not (a & b)


def test_generate_hyperedges_small():
    g = build_graph([(1, 2, 0), (2, 3, 0), (4, 5, 1)])
    buckets = generate_hyperedges(g)
    assert len(buckets) == 2
    assert [h.node_ids for h in buckets[0]] == [{1, 2, 3}]
    assert [h.node_ids for h in buckets[1]] == [{4, 5}]
    assert buckets[0].hyperedges()[0].relation_tags == {0}


def test_generate_hyperedges_drops_empty_relations():
    g = build_graph([(0, 1, 0)], n_relations=3)
    buckets = generate_hyperedges(g)
    assert [b.id for b in buckets] == [0]


def test_generate_hyperedges_planted_cliques():
    # 3 relations x 4 planted cliques; every hyperedge equals its clique
    edges = []
    planted = {}
    node = 0
    for r in range(3):
        planted[r] = []
        for _ in range(4):
            clique = list(range(node, node + 5))
            node += 5
            planted[r].append(set(clique))
            for i in range(5):
                for j in range(i + 1, 5):
                    edges.append((clique[i], clique[j], r))
    g = build_graph(edges)
    buckets = generate_hyperedges(g)
    assert len(buckets) == 3
    for b in buckets:
        got = sorted((h.node_ids for h in b), key=min)
        assert got == sorted(planted[b.id], key=min)


def test_bucket_invariants():
    g = random_hin(7, n_nodes=150, n_relations=4)
    buckets = generate_hyperedges(g)
    ids = [h.id for b in buckets for h in b]
    assert len(ids) == len(set(ids))
    for b in buckets:
        edges = b.hyperedges()
        # pairwise disjoint inside one bucket
        for i in range(len(edges)):
            for j in range(i + 1, len(edges)):
                assert not (edges[i].node_ids & edges[j].node_ids)
        # ascending (size, id) iteration
        keys = [(h.size, h.id) for h in edges]
        assert keys == sorted(keys)
        # node_index is exactly the inverse incidence
        index = {}
        for h in edges:
            for v in h.node_ids:
                index.setdefault(v, set()).add(h.id)
        assert index == b.node_index
        # union of node ids equals the endpoints of that relation
        endpoints = {v for u, w in g.edges_by_rel[b.id] for v in (u, w)}
        assert set().union(*(h.node_ids for h in edges)) == endpoints


def test_generate_deterministic_across_workers(tmp_path):
    g = random_hin(13, n_nodes=200, n_relations=5)
    dumps = []
    for workers in (1, 4, 8):
        buckets = generate_hyperedges(g, max_workers=workers)
        path = tmp_path / f"dump_{workers}.tsv"
        dump_hyperedges(buckets, path)
        dumps.append(path.read_bytes())
    assert dumps[0] == dumps[1] == dumps[2]


def test_bucket_add_remove_consistency():
    b = Bucket(id=0)
    h1 = Hyperedge(id=0, relation_tags={0}, node_ids={1, 2})
    h2 = Hyperedge(id=1, relation_tags={0}, node_ids={2, 3, 4})
    b.add(h1)
    b.add(h2)
    assert b.node_index[2] == {0, 1}
    b.remove(h1)
    assert b.node_index[2] == {1}
    assert 1 not in b.node_index
    assert [h.id for h in b] == [1]


def test_bucket_stats_cases():
    g = build_graph([(1, 2, 0), (2, 3, 0), (4, 5, 1)])
    stats = bucket_stats(generate_hyperedges(g))
    assert stats == {"count": 2, "largest": 3, "mean": 2.5}
    assert bucket_stats([]) == {"count": 0, "largest": 0, "mean": 0.0}


def test_paper_scale_dataset_counts():
    # Large public biomedical network: 63,109 nodes, 10 edge types,
    # 9,028 total components, largest 24,429. Runs only when the dataset
    # is provided locally.
    import os

    path = os.environ.get("HINEMBED_PUBMED_EDGES")
    if not path:
        pytest.skip("set HINEMBED_PUBMED_EDGES to run the full-dataset check")
    from hinembed.hin import load_hin

    g = load_hin(path)
    assert len(g.nodes) == 63_109
    assert g.relation_count == 10
    buckets = generate_hyperedges(g, max_workers=4)
    stats = bucket_stats(buckets)
    assert stats["count"] == 9_028
    assert stats["largest"] == 24_429
    assert stats["mean"] == pytest.approx(454, abs=1)
