"""Per-partition unsupervised embedding worker.

A small GCN encoder is trained full-batch to tell apart node embeddings of
the real partition from embeddings of a randomly corrupted copy, judged
against a pooled partition summary. All parameters are local to the worker;
gradients are exact backpropagation through the encoder, readout, and
discriminator, computed in float64 so runs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NonFinite, NonFiniteLoss, ShapeMismatch
from .hin import Partition

SCORE_EPS = 1e-7
MIN_IMPROVEMENT = 1e-4
PRELU_INIT = 0.25
_ENUM_PAIR_LIMIT = 2_000_000


@dataclass
class WorkerConfig:
    dim: int = 32
    layers: int = 1
    epochs: int = 100
    lr: float = 0.01
    corruption_rate: float = 0.1
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.layers < 1:
            raise ValueError("dim and layers must be >= 1")
        if not (0.0 <= self.corruption_rate <= 1.0):
            raise ValueError("corruption_rate must lie in [0, 1]")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass
class WorkerParams:
    gcn_weights: list[np.ndarray]      # layer 0: d0 x d, later: d x d
    prelu_slopes: np.ndarray           # one per GCN layer plus the discriminator
    disc_weight: np.ndarray            # 2d x d
    disc_bias: np.ndarray              # (d,)
    proj_weight: np.ndarray            # (d,)


@dataclass
class EmbeddingMatrix:
    partition_id: int
    node_ids: list[int]
    z: np.ndarray                      # row i belongs to node_ids[i]


def init_params(input_dim: int, cfg: WorkerConfig, rng: np.random.Generator) -> WorkerParams:
    """Uniform +-1/sqrt(fan-in) weights, zero bias, 0.25 activation slopes."""
    weights = []
    fan_in = input_dim
    for _ in range(cfg.layers):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, cfg.dim)))
        fan_in = cfg.dim
    d = cfg.dim
    disc_weight = rng.uniform(-1.0 / math.sqrt(2 * d), 1.0 / math.sqrt(2 * d), size=(2 * d, d))
    proj_weight = rng.uniform(-1.0 / math.sqrt(d), 1.0 / math.sqrt(d), size=d)
    return WorkerParams(
        gcn_weights=weights,
        prelu_slopes=np.full(cfg.layers + 1, PRELU_INIT),
        disc_weight=disc_weight,
        disc_bias=np.zeros(d),
        proj_weight=proj_weight,
    )


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _prelu(x, slope):
    return np.where(x >= 0, x, slope * x)


def _prelu_grad(x, slope):
    return np.where(x >= 0, 1.0, slope)


def normalize_adjacency(a: sp.csr_matrix) -> sp.csr_matrix:
    """Symmetric degree normalization d^-1/2 A d^-1/2 (self-loops assumed)."""
    deg = np.asarray(a.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    scale = sp.diags(dinv)
    return (scale @ a @ scale).tocsr()


def _run_gcn(x, a_norm, params, keep_cache=False):
    z = x
    caches = []
    for i, w in enumerate(params.gcn_weights):
        m = a_norm @ z
        h = m @ w
        if keep_cache:
            caches.append((m, h))
        z = _prelu(h, params.prelu_slopes[i])
    return (z, caches) if keep_cache else z


def gcn_forward(x: np.ndarray, a: sp.csr_matrix, params: WorkerParams) -> np.ndarray:
    """Normalized propagation through all layers with PReLU nonlinearity."""
    x = np.asarray(x, dtype=np.float64)
    if a.shape[0] != a.shape[1] or a.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"adjacency {a.shape} vs features {x.shape}")
    if x.shape[1] != params.gcn_weights[0].shape[0]:
        raise ShapeMismatch(f"feature dim {x.shape[1]} != weight fan-in {params.gcn_weights[0].shape[0]}")
    if a.shape[0] and (a.diagonal() != 1.0).any():
        raise ShapeMismatch("adjacency must carry self-loops on every node")
    z = _run_gcn(x, normalize_adjacency(a), params)
    if not np.all(np.isfinite(z)):
        raise NonFinite("gcn_forward produced non-finite values")
    return z


def readout(z: np.ndarray) -> np.ndarray:
    """Logistic sigmoid of the column mean."""
    z = np.asarray(z, dtype=np.float64)
    return _sigmoid(z.mean(axis=0))


def _disc_batch(z, s, params, keep_cache=False):
    n = z.shape[0]
    c = np.hstack([z, np.broadcast_to(s, (n, s.shape[-1]))])
    p = c @ params.disc_weight + params.disc_bias
    q = _prelu(p, params.prelu_slopes[-1])
    u = q @ params.proj_weight
    scores = _sigmoid(u)
    if keep_cache:
        return scores, (c, p, q)
    return scores


def discriminator(z: np.ndarray, s: np.ndarray, params: WorkerParams) -> float:
    """Affinity score in (0, 1) between one embedding and the summary."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    s = np.asarray(s, dtype=np.float64).ravel()
    d = params.disc_bias.shape[0]
    if z.shape[1] != d or s.shape[0] != d:
        raise ShapeMismatch(f"expected width {d}, got z {z.shape} and s {s.shape}")
    return float(_disc_batch(z, s, params)[0])


def dgi_loss(pos_scores, neg_scores) -> float:
    """Binary cross-entropy over positive and corrupted-negative scores."""
    pos = np.clip(np.asarray(pos_scores, dtype=np.float64), SCORE_EPS, 1 - SCORE_EPS)
    neg = np.clip(np.asarray(neg_scores, dtype=np.float64), SCORE_EPS, 1 - SCORE_EPS)
    total = pos.size + neg.size
    return float(-(np.log(pos).sum() + np.log1p(-neg).sum()) / total)


# --- corruption --------------------------------------------------------------


def _edge_pairs(a: sp.csr_matrix) -> list[tuple[int, int]]:
    coo = sp.triu(a, k=1).tocoo()
    pairs = sorted(zip(coo.row.tolist(), coo.col.tolist()))
    return pairs


def _sample_absent_pairs(n, existing, count, rng):
    if count <= 0:
        return []
    total = n * (n - 1) // 2
    if total <= _ENUM_PAIR_LIMIT:
        absent = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if (i, j) not in existing
        ]
        count = min(count, len(absent))
        idx = rng.choice(len(absent), size=count, replace=False) if absent else []
        return [absent[i] for i in sorted(idx)]
    # large graphs: rejection sampling; the pair space is far from saturated
    picked = set()
    attempts = 0
    limit = 60 * count + 1000
    while len(picked) < count and attempts < limit:
        i, j = rng.integers(0, n, size=2)
        attempts += 1
        if i == j:
            continue
        pair = (int(min(i, j)), int(max(i, j)))
        if pair in existing or pair in picked:
            continue
        picked.add(pair)
    return sorted(picked)


def corrupt(a: sp.csr_matrix, x: np.ndarray, rate: float, rng: np.random.Generator):
    """Randomly rewire a fraction of edges, producing the negative sample.

    ceil(rate * edges) off-diagonal edges are deleted and the same number of
    absent pairs inserted (fewer when the graph has no room). Nodes left with
    only their self-loop are dropped together with their feature rows; the
    result is re-symmetrized with self-loops.
    """
    if rate == 0.0:
        return a, x
    n = a.shape[0]
    pairs = _edge_pairs(a)
    n_del = math.ceil(rate * len(pairs))
    if n_del:
        del_idx = set(rng.choice(len(pairs), size=n_del, replace=False).tolist())
        kept = [p for i, p in enumerate(pairs) if i not in del_idx]
    else:
        kept = list(pairs)
    inserted = _sample_absent_pairs(n, set(pairs), n_del, rng)
    new_pairs = kept + inserted

    degree = np.zeros(n, dtype=np.int64)
    for i, j in new_pairs:
        degree[i] += 1
        degree[j] += 1
    keep_nodes = np.flatnonzero(degree > 0)
    remap = {int(v): k for k, v in enumerate(keep_nodes)}
    m = len(keep_nodes)

    rows = list(range(m))
    cols = list(range(m))
    for i, j in new_pairs:
        ri, rj = remap[i], remap[j]
        rows.extend((ri, rj))
        cols.extend((rj, ri))
    data = np.ones(len(rows))
    a_tilde = sp.csr_matrix((data, (rows, cols)), shape=(m, m))
    a_tilde.data[:] = 1.0
    return a_tilde, x[keep_nodes]


# --- training ----------------------------------------------------------------


def _zero_grads(params: WorkerParams) -> WorkerParams:
    return WorkerParams(
        gcn_weights=[np.zeros_like(w) for w in params.gcn_weights],
        prelu_slopes=np.zeros_like(params.prelu_slopes),
        disc_weight=np.zeros_like(params.disc_weight),
        disc_bias=np.zeros_like(params.disc_bias),
        proj_weight=np.zeros_like(params.proj_weight),
    )


def _disc_backward(g_u, cache, params, grads):
    """Backprop one discriminator pass; returns (dL/dZ, dL/ds)."""
    c, p, q = cache
    d = params.disc_bias.shape[0]
    g_q = g_u[:, None] * params.proj_weight[None, :]
    grads.proj_weight += q.T @ g_u
    g_p = g_q * _prelu_grad(p, params.prelu_slopes[-1])
    grads.prelu_slopes[-1] += float((g_q * p * (p < 0)).sum())
    grads.disc_weight += c.T @ g_p
    grads.disc_bias += g_p.sum(axis=0)
    g_c = g_p @ params.disc_weight.T
    return g_c[:, :d], g_c[:, d:].sum(axis=0)


def _gcn_backward(g_z, caches, a_norm, params, grads):
    for i in range(len(params.gcn_weights) - 1, -1, -1):
        m, h = caches[i]
        g_h = g_z * _prelu_grad(h, params.prelu_slopes[i])
        grads.prelu_slopes[i] += float((g_z * h * (h < 0)).sum())
        grads.gcn_weights[i] += m.T @ g_h
        if i > 0:
            g_z = a_norm @ (g_h @ params.gcn_weights[i].T)


def loss_and_grads(params, x, a_norm, x_tilde, a_norm_tilde):
    """Loss plus exact gradients for one fixed corruption draw."""
    z_pos, cache_pos = _run_gcn(x, a_norm, params, keep_cache=True)
    z_neg, cache_neg = _run_gcn(x_tilde, a_norm_tilde, params, keep_cache=True)
    mean_pos = z_pos.mean(axis=0)
    s = _sigmoid(mean_pos)
    pos_scores, disc_pos = _disc_batch(z_pos, s, params, keep_cache=True)
    neg_scores, disc_neg = _disc_batch(z_neg, s, params, keep_cache=True)
    loss = dgi_loss(pos_scores, neg_scores)

    n_pos = pos_scores.size
    n_neg = neg_scores.size
    total = n_pos + n_neg
    live_pos = (pos_scores > SCORE_EPS) & (pos_scores < 1 - SCORE_EPS)
    live_neg = (neg_scores > SCORE_EPS) & (neg_scores < 1 - SCORE_EPS)
    g_u_pos = np.where(live_pos, -(1.0 - pos_scores), 0.0) / total
    g_u_neg = np.where(live_neg, neg_scores, 0.0) / total

    grads = _zero_grads(params)
    g_z_pos, g_s = _disc_backward(g_u_pos, disc_pos, params, grads)
    g_z_neg, g_s_neg = _disc_backward(g_u_neg, disc_neg, params, grads)
    g_s = g_s + g_s_neg

    g_mean = g_s * s * (1.0 - s)
    g_z_pos = g_z_pos + g_mean[None, :] / n_pos

    _gcn_backward(g_z_pos, cache_pos, a_norm, params, grads)
    _gcn_backward(g_z_neg, cache_neg, a_norm_tilde, params, grads)
    return loss, grads


def _apply_step(params: WorkerParams, grads: WorkerParams, lr: float) -> None:
    for w, g in zip(params.gcn_weights, grads.gcn_weights):
        w -= lr * g
    params.prelu_slopes -= lr * grads.prelu_slopes
    params.disc_weight -= lr * grads.disc_weight
    params.disc_bias -= lr * grads.disc_bias
    params.proj_weight -= lr * grads.proj_weight


def train_worker_traced(p: Partition, cfg: WorkerConfig) -> tuple[EmbeddingMatrix, list[float]]:
    """Full-batch gradient descent with early stopping; returns loss trace."""
    rng = np.random.default_rng(cfg.seed)
    params = init_params(p.features.shape[1], cfg, rng)
    a_norm = normalize_adjacency(p.adjacency)
    x = p.features

    losses: list[float] = []
    best = math.inf
    bad = 0
    for epoch in range(cfg.epochs):
        a_tilde, x_tilde = corrupt(p.adjacency, x, cfg.corruption_rate, rng)
        a_norm_tilde = a_norm if a_tilde is p.adjacency else normalize_adjacency(a_tilde)
        loss, grads = loss_and_grads(params, x, a_norm, x_tilde, a_norm_tilde)
        if not math.isfinite(loss):
            raise NonFiniteLoss(p.id, epoch, loss)
        losses.append(loss)
        _apply_step(params, grads, cfg.lr)
        if loss < best - MIN_IMPROVEMENT:
            best = loss
            bad = 0
        else:
            bad += 1
            if bad >= cfg.patience:
                break

    z = _run_gcn(x, a_norm, params)
    if not np.all(np.isfinite(z)):
        raise NonFiniteLoss(p.id, len(losses), float("nan"))
    return EmbeddingMatrix(p.id, list(p.node_ids), z), losses


def train_worker(p: Partition, cfg: WorkerConfig) -> EmbeddingMatrix:
    """Train on one partition and return its node embeddings."""
    return train_worker_traced(p, cfg)[0]


# --- parameter (un)flattening, used by gradient checks ------------------------


def params_to_vector(params: WorkerParams) -> np.ndarray:
    chunks = [w.ravel() for w in params.gcn_weights]
    chunks += [params.prelu_slopes, params.disc_weight.ravel(), params.disc_bias, params.proj_weight]
    return np.concatenate(chunks)


def vector_to_params(vec: np.ndarray, template: WorkerParams) -> WorkerParams:
    out = []
    offset = 0

    def take(shape):
        nonlocal offset
        size = int(np.prod(shape))
        block = vec[offset : offset + size].reshape(shape)
        offset += size
        return block.copy()

    weights = [take(w.shape) for w in template.gcn_weights]
    slopes = take(template.prelu_slopes.shape)
    disc_w = take(template.disc_weight.shape)
    disc_b = take(template.disc_bias.shape)
    proj = take(template.proj_weight.shape)
    return WorkerParams(weights, slopes, disc_w, disc_b, proj)


# --- artifacts ----------------------------------------------------------------


def write_worker_embeddings(embeddings: list[EmbeddingMatrix], path, name_of=str) -> None:
    """TSV rows: node id, partition id, comma-joined embedding."""
    with open(path, "w", encoding="utf-8") as fh:
        for emb in sorted(embeddings, key=lambda e: e.partition_id):
            for i, v in enumerate(emb.node_ids):
                row = ",".join(format(val, ".17g") for val in emb.z[i])
                fh.write(f"{name_of(v)}\t{emb.partition_id}\t{row}\n")


def write_loss_trace(losses: list[float], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(losses):
            fh.write(f"{i},{format(loss, '.17g')}\n")
