"""Rotation + isotropic scale + translation fits between embedding spaces.

Each partition's anchor-node embeddings are mapped onto the anchor network's
space with the closed-form extended orthogonal Procrustes solution; the
fitted map is then applied to the whole partition, and nodes occurring in
several partitions get their aligned contexts averaged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .concurrency import run_tasks
from .errors import EmptyContextList, ShapeMismatch, TooFewAnchors
from .svd import jacobi_svd

log = logging.getLogger(__name__)


@dataclass
class AlignmentMap:
    """z -> c * z @ rotation + translation."""

    rotation: np.ndarray     # d x d, orthogonal
    scale: float
    translation: np.ndarray  # (d,)
    source_partition: int = -1
    mu: int = 0

    @property
    def dim(self) -> int:
        return self.rotation.shape[0]


@dataclass
class AnchorPair:
    node_id: int
    z_hat: np.ndarray        # partition-space embedding
    g_hat: np.ndarray        # anchor-space embedding


def identity_map(dim: int, translation=None, source_partition: int = -1, mu: int = 0) -> AlignmentMap:
    t = np.zeros(dim) if translation is None else np.asarray(translation, dtype=np.float64)
    return AlignmentMap(np.eye(dim), 1.0, t, source_partition, mu)


def fit_procrustes(pairs: list[AnchorPair], source_partition: int = -1) -> AlignmentMap:
    """Least-squares rotation, positive scale, and translation over pairs.

    Both point sets are centered; the rotation is u @ vt from the SVD of the
    cross-covariance, the scale is tr(sigma) over the source's centered
    squared norm, and the translation re-attaches the means. A single pair
    yields a pure translation; zero pairs raise TooFewAnchors; a source with
    no variance falls back to translation-only with a warning.
    """
    mu = len(pairs)
    if mu == 0:
        raise TooFewAnchors(0)
    z = np.array([p.z_hat for p in pairs], dtype=np.float64)
    g = np.array([p.g_hat for p in pairs], dtype=np.float64)
    d = z.shape[1]
    if mu == 1:
        return identity_map(d, g[0] - z[0], source_partition, mu)

    z_mean = z.mean(axis=0)
    g_mean = g.mean(axis=0)
    zc = z - z_mean
    gc = g - g_mean
    z_norm = float((zc * zc).sum())
    if z_norm <= 1e-24:
        log.warning("partition %s: anchor embeddings have no variance; translation-only map", source_partition)
        return identity_map(d, g_mean - z_mean, source_partition, mu)

    cross = zc.T @ gc
    u, sigma, vt = jacobi_svd(cross)
    rotation = u @ vt
    scale = float(sigma.sum()) / z_norm
    if scale <= 0.0:
        log.warning("partition %s: degenerate anchor target; translation-only map", source_partition)
        return identity_map(d, g_mean - z_mean, source_partition, mu)
    translation = g_mean - scale * (z_mean @ rotation)
    return AlignmentMap(rotation, scale, translation, source_partition, mu)


def apply_map(z: np.ndarray, m: AlignmentMap) -> np.ndarray:
    """Row-wise c * z @ T + t."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != m.dim:
        raise ShapeMismatch(f"embedding dim {z.shape[-1]} != map dim {m.dim}")
    return m.scale * (z @ m.rotation) + m.translation


def alignment_residual(pairs: list[AnchorPair], m: AlignmentMap) -> float:
    """Frobenius norm of c*Z@T + t - G over the anchor pairs."""
    z = np.array([p.z_hat for p in pairs], dtype=np.float64)
    g = np.array([p.g_hat for p in pairs], dtype=np.float64)
    return float(np.linalg.norm(apply_map(z, m) - g))


def aggregate_contexts(aligned: dict[int, list[np.ndarray]]) -> dict[int, np.ndarray]:
    """Mean of each node's aligned context vectors.

    Divides by the number of contexts the node actually has, so a node seen
    in a single partition keeps its vector unchanged.
    """
    out = {}
    for node, vectors in aligned.items():
        if not vectors:
            raise EmptyContextList(f"node {node} has no context vectors")
        out[node] = np.mean(np.asarray(vectors, dtype=np.float64), axis=0)
    return out


@dataclass
class AlignmentReport:
    partition_id: int
    mu: int
    residual: float
    scale: float
    identity_fallback: bool = False


def align_all(
    partition_embeddings,
    anchor_embedding,
    anchors,
    max_workers: int = 1,
) -> tuple[dict[int, np.ndarray], list[AlignmentReport]]:
    """Map every partition onto the anchor space and aggregate per node.

    ``partition_embeddings`` and ``anchor_embedding`` are EmbeddingMatrix
    values; ``anchors`` is the AnchorNetwork. Partitions sharing no node with
    the anchor network keep their raw space (identity fallback, logged).
    Nodes appearing only in the anchor network take its embedding directly.
    """
    anchor_rows = {v: anchor_embedding.z[i] for i, v in enumerate(anchor_embedding.node_ids)}
    anchor_nodes = set(anchor_embedding.node_ids)

    def fit_one(emb):
        pairs = [
            AnchorPair(v, emb.z[i], anchor_rows[v])
            for i, v in enumerate(emb.node_ids)
            if v in anchor_nodes
        ]
        if not pairs:
            log.warning("partition %s shares no node with the anchor network; identity fallback", emb.partition_id)
            m = identity_map(emb.z.shape[1], source_partition=emb.partition_id)
            return m, AlignmentReport(emb.partition_id, 0, float("nan"), 1.0, True)
        m = fit_procrustes(pairs, source_partition=emb.partition_id)
        return m, AlignmentReport(emb.partition_id, m.mu, alignment_residual(pairs, m), m.scale)

    fitted = run_tasks([lambda e=e: fit_one(e) for e in partition_embeddings], max_workers=max_workers)

    contexts: dict[int, list[np.ndarray]] = {}
    for emb, (m, _) in zip(partition_embeddings, fitted):
        mapped = apply_map(emb.z, m)
        for i, v in enumerate(emb.node_ids):
            contexts.setdefault(v, []).append(mapped[i])

    final = aggregate_contexts(contexts)
    for v in anchor_nodes - final.keys():
        final[v] = anchor_rows[v]
    return final, [report for _, report in fitted]


def write_alignment_report(reports: list[AlignmentReport], path) -> None:
    """TSV rows: partition_id, anchor count, residual, scale."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in sorted(reports, key=lambda r: r.partition_id):
            fh.write(f"{r.partition_id}\t{r.mu}\t{format(r.residual, '.17g')}\t{format(r.scale, '.17g')}\n")
