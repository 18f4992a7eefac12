import numpy as np
import pytest

from hinembed.datagen import build_graph, random_hin
from hinembed.errors import (
    DanglingFeature,
    DanglingLabel,
    EmptyGraph,
    MalformedLine,
    UnknownNode,
    UnknownRelation,
)
from hinembed.hin import induce_partition, load_hin, neighborhood, relation_subgraph, save_hin

EDGES = """\
1\tA\tr0\t2\tB
2\tB\tr0\t3\tA
4\tA\tr1\t5\tB
"""


@pytest.fixture
def edge_file(tmp_path):
    path = tmp_path / "edges.tsv"
    path.write_text(EDGES)
    return path


def test_load_basic(edge_file):
    g = load_hin(edge_file)
    assert len(g.nodes) == 5
    assert len(g.edges) == 3
    assert g.relation_count == 2
    assert g.node_type_count == 2
    # first-appearance interning
    assert g.node_names == ["1", "2", "3", "4", "5"]
    assert g.relation_names == ["r0", "r1"]


def test_load_dedup(tmp_path):
    path = tmp_path / "edges.tsv"
    path.write_text(EDGES + "2\tB\tr0\t3\tA\n")
    g = load_hin(path)
    assert len(g.edges) == 3


def test_load_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "edges.tsv"
    path.write_text("# header\n\n" + EDGES)
    assert len(load_hin(path).edges) == 3


def test_load_malformed_line(tmp_path):
    path = tmp_path / "edges.tsv"
    path.write_text("1\tA\tr0\t2\n")
    with pytest.raises(MalformedLine) as err:
        load_hin(path)
    assert err.value.line_no == 1


def test_load_empty(tmp_path):
    path = tmp_path / "edges.tsv"
    path.write_text("# nothing\n")
    with pytest.raises(EmptyGraph):
        load_hin(path)


def test_dangling_feature_and_label(tmp_path, edge_file):
    feat = tmp_path / "features.tsv"
    feat.write_text("99\t0.5,0.5\n")
    with pytest.raises(DanglingFeature):
        load_hin(edge_file, feature_path=feat)
    lab = tmp_path / "labels.tsv"
    lab.write_text("99\tx\n")
    with pytest.raises(DanglingLabel):
        load_hin(edge_file, label_path=lab)


def test_feature_dim_mismatch(tmp_path, edge_file):
    feat = tmp_path / "features.tsv"
    feat.write_text("1\t0.5,0.5\n2\t0.5\n")
    with pytest.raises(MalformedLine):
        load_hin(edge_file, feature_path=feat)


def test_multilabel_load(tmp_path, edge_file):
    lab = tmp_path / "labels.tsv"
    lab.write_text("1\tx\n1\ty\n2\tx\n")
    g = load_hin(edge_file, label_path=lab)
    assert g.labels[0] == {0, 1}
    assert g.labels[1] == {0}


def test_roundtrip_save_load(tmp_path):
    raw = random_hin(5, n_nodes=60, n_relations=3)
    rng = np.random.default_rng(0)
    raw.features = {v: rng.normal(size=4) for v in raw.nodes}
    raw.labels = {v: {v % 3} for v in sorted(raw.nodes)[:20]}
    raw.label_names = ["a", "b", "c"]
    e1, f1, l1 = tmp_path / "e1.tsv", tmp_path / "f1.tsv", tmp_path / "l1.tsv"
    save_hin(raw, e1, f1, l1)
    g = load_hin(e1, f1, l1)  # canonical: ids in first-appearance order

    e2, f2, l2 = tmp_path / "e2.tsv", tmp_path / "f2.tsv", tmp_path / "l2.tsv"
    save_hin(g, e2, f2, l2)
    g2 = load_hin(e2, f2, l2)
    assert g2.nodes == g.nodes
    assert g2.edges == g.edges
    assert g2.node_names == g.node_names
    assert set(g2.features) == set(g.features)
    for v in g.features:
        assert np.array_equal(g2.features[v], g.features[v])
    assert g2.labels == g.labels


def test_relation_subgraph(edge_file):
    g = load_hin(edge_file)
    assert relation_subgraph(g, 1) == [(3, 4)]
    assert relation_subgraph(g, 0) == [(0, 1), (1, 2)]
    with pytest.raises(UnknownRelation):
        relation_subgraph(g, 2)


def test_relation_partition_of_edges():
    g = random_hin(11, n_nodes=100, n_relations=4)
    total = sum(len(relation_subgraph(g, r)) for r in range(g.relation_count))
    assert total == len(g.edges)


def test_neighborhood(edge_file):
    g = load_hin(edge_file)
    assert neighborhood(g, 1, 0).neighbors == {0, 2}
    assert neighborhood(g, 3, 0).neighbors == set()
    with pytest.raises(UnknownNode):
        neighborhood(g, 42, 0)
    with pytest.raises(UnknownRelation):
        neighborhood(g, 1, 9)


def test_neighborhood_oracle():
    # per-edge scan oracle over a random graph
    g = random_hin(23, n_nodes=100, n_relations=3)
    for r in range(g.relation_count):
        oracle = {}
        for u, v in relation_subgraph(g, r):
            if u != v:
                oracle.setdefault(u, set()).add(v)
                oracle.setdefault(v, set()).add(u)
        for v in g.nodes:
            assert neighborhood(g, v, r).neighbors == oracle.get(v, set())


def test_induce_partition_small(edge_file):
    g = load_hin(edge_file)
    p = induce_partition(g, {0, 1, 2}, id=0)
    dense = p.adjacency.toarray()
    expected = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=float)
    assert np.array_equal(dense, expected)

    single = induce_partition(g, {3}, id=1)
    assert np.array_equal(single.adjacency.toarray(), np.array([[1.0]]))


def test_induce_partition_unknown_node(edge_file):
    g = load_hin(edge_file)
    with pytest.raises(UnknownNode):
        induce_partition(g, {0, 77}, id=0)


def test_induce_partition_oracle():
    # brute-force double loop over all edges vs the sparse build
    g = random_hin(3, n_nodes=200, n_relations=3)
    rng = np.random.default_rng(1)
    members = sorted(rng.choice(sorted(g.nodes), size=50, replace=False).tolist())
    p = induce_partition(g, members, id=0)
    n = len(members)
    lut = {v: i for i, v in enumerate(members)}
    expected = np.eye(n)
    for s, d, _ in g.edges:
        if s in lut and d in lut:
            expected[lut[s], lut[d]] = 1.0
            expected[lut[d], lut[s]] = 1.0
    assert np.array_equal(p.adjacency.toarray(), expected)


def test_induce_partition_whole_graph_invariant():
    g = random_hin(9, n_nodes=80, n_relations=3)
    members = sorted(g.nodes)
    p = induce_partition(g, members, id=0)
    dense = p.adjacency.toarray()
    pair_has_edge = {(min(s, d), max(s, d)) for s, d, _ in g.edges}
    for i, u in enumerate(members):
        for j, v in enumerate(members):
            if i == j:
                assert dense[i, j] == 1.0
            else:
                expected = 1.0 if (min(u, v), max(u, v)) in pair_has_edge else 0.0
                assert dense[i, j] == expected


def test_featureless_fallback_one_hot():
    g = build_graph([(0, 1, 0), (1, 2, 0)])
    p = induce_partition(g, {0, 1, 2}, id=0, fallback_dim=8)
    assert p.features.shape == (3, 8)
    assert np.array_equal(p.features[:, :3], np.eye(3))


def test_featureless_fallback_hashed():
    edges = [(i, i + 1, 0) for i in range(40)]
    g = build_graph(edges)
    p = induce_partition(g, range(41), id=0, fallback_dim=8)
    assert p.features.shape == (41, 8)
    assert np.array_equal(p.features.sum(axis=1), np.ones(41))
