"""Synthetic multi-relation graph generators for tests and demos.

The community generator plants labeled clusters whose single-relation
components line up with the partitioner's contraction behavior: two
intra-community relations, one relation joining community pairs, and sparse
bridge components straddling pair boundaries so the partitions overlap.
"""

from __future__ import annotations

import numpy as np

from .hin import HinGraph


def build_graph(edges, n_relations=None, features=None, labels=None) -> HinGraph:
    """Assemble a HinGraph from dense-id edge triples (src, dst, rel)."""
    dedup = []
    seen = set()
    for triple in edges:
        t = (int(triple[0]), int(triple[1]), int(triple[2]))
        if t not in seen:
            seen.add(t)
            dedup.append(t)
    nodes = sorted({v for s, d, _ in dedup for v in (s, d)})
    if features:
        nodes = sorted(set(nodes) | set(features))
    if labels:
        nodes = sorted(set(nodes) | set(labels))
    if n_relations is None:
        n_relations = max((r for _, _, r in dedup), default=-1) + 1
    max_id = max(nodes) if nodes else -1
    g = HinGraph(
        nodes={v: 0 for v in nodes},
        edges=dedup,
        features=dict(features) if features else None,
        labels={v: set(ls) for v, ls in labels.items()} if labels else None,
        relation_count=n_relations,
        node_type_count=1,
        node_names=[f"n{v}" for v in range(max_id + 1)],
        type_names=["t0"],
        relation_names=[f"r{r}" for r in range(n_relations)],
        label_names=[],
    )
    return g.finalize()


def _random_connected(nodes, rng, extra_edge_factor=1.0):
    """Random recursive tree over nodes plus extra random edges."""
    order = [nodes[i] for i in rng.permutation(len(nodes))]
    edges = []
    for i in range(1, len(order)):
        j = int(rng.integers(0, i))
        edges.append((order[j], order[i]))
    n_extra = int(extra_edge_factor * len(nodes))
    for _ in range(n_extra):
        a, b = rng.choice(len(order), size=2, replace=False)
        u, v = order[int(a)], order[int(b)]
        if u != v:
            edges.append((min(u, v), max(u, v)))
    return edges


def random_hin(seed, n_nodes=300, n_relations=4, components_per_relation=(2, 6), coverage=(0.3, 0.9)) -> HinGraph:
    """Random multi-relation graph: each relation is a union of random
    connected chunks over a random node subset."""
    rng = np.random.default_rng(seed)
    edges = []
    for r in range(n_relations):
        frac = rng.uniform(*coverage)
        pool_size = max(4, int(frac * n_nodes))
        pool = rng.choice(n_nodes, size=pool_size, replace=False).tolist()
        n_comp = int(rng.integers(components_per_relation[0], components_per_relation[1] + 1))
        cuts = sorted(rng.choice(range(2, pool_size - 1), size=min(n_comp - 1, max(pool_size - 3, 0)), replace=False).tolist()) if n_comp > 1 and pool_size > 4 else []
        chunks = []
        prev = 0
        for c in cuts + [pool_size]:
            chunk = pool[prev:c]
            if len(chunk) >= 2:
                chunks.append(chunk)
            prev = c
        for chunk in chunks:
            for u, v in _random_connected(chunk, rng, extra_edge_factor=0.8):
                edges.append((u, v, r))
    return build_graph(edges, n_relations=n_relations)


def community_hin(
    seed,
    n_communities=6,
    community_size=100,
    intra_relations=2,
    pair_systems=2,
    feature_dim=16,
    feature_signal=1.0,
    feature_noise=0.4,
    intra_coverage=0.85,
    pair_coverage=0.9,
    intra_density=1.5,
    label_classes=None,
) -> HinGraph:
    """Planted labeled communities with overlapping relation components.

    Relations: ``intra_relations`` community-local relations (the first one
    spans whole communities so no node is isolated), plus ``pair_systems``
    relations whose components each join two consecutive communities, every
    system offset by one. Two offset pair systems make each community belong
    to two pair components whose union exceeds reasonable upper bounds, so
    the partitioner keeps both as overlapping partitions and nearly every
    node ends up with two embedding contexts.
    """
    rng = np.random.default_rng(seed)
    n = n_communities * community_size
    community = {v: v // community_size for v in range(n)}
    members = [list(range(c * community_size, (c + 1) * community_size)) for c in range(n_communities)]

    edges = []
    rel = 0
    for k in range(intra_relations):
        coverage = 1.0 if k == 0 else intra_coverage
        for c in range(n_communities):
            size = max(2, int(coverage * community_size))
            sub = rng.choice(members[c], size=size, replace=False).tolist()
            for u, v in _random_connected(sub, rng, extra_edge_factor=intra_density):
                edges.append((u, v, rel))
        rel += 1

    for offset in range(pair_systems):
        taken = set()
        for c in range(offset, n_communities + offset, 2):
            ca, cb = c % n_communities, (c + 1) % n_communities
            if ca in taken or cb in taken or ca == cb:
                continue
            taken.update((ca, cb))
            pool = members[ca] + members[cb]
            size = max(2, int(pair_coverage * len(pool)))
            sub = rng.choice(pool, size=size, replace=False).tolist()
            for u, v in _random_connected(sub, rng, extra_edge_factor=1.0):
                edges.append((u, v, rel))
        rel += 1

    features = {}
    for v in range(n):
        vec = rng.normal(0.0, feature_noise, size=feature_dim)
        vec[community[v] % feature_dim] += feature_signal
        features[v] = vec
    n_labels = label_classes or n_communities
    labels = {v: {community[v] % n_labels} for v in range(n)}
    g = build_graph(edges, n_relations=rel, features=features, labels=labels)
    g.label_names = [f"c{c}" for c in range(n_labels)]
    return g
