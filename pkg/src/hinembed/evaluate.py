"""Downstream evaluation: node classification and link prediction.

Both tasks use a small self-contained one-vs-rest logistic model trained by
full-batch gradient descent; AUC comes from the rank statistic. Splits and
negative sampling are seeded so every number is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InsufficientLabels, TooFewEdges
from .hin import HinGraph

EVAL_RUNS = 5


@dataclass
class EvalConfig:
    train_fraction: float = 0.7
    hidden_link_fraction: float = 0.2
    classifier_epochs: int = 300
    classifier_lr: float = 0.5

    def __post_init__(self):
        for name in ("train_fraction", "hidden_link_fraction"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {value}")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def train_logistic(x, y, epochs, lr, l2=1e-4):
    """One weight column per label; full-batch gradient descent."""
    n = x.shape[0]
    xb = np.hstack([x, np.ones((n, 1))])
    w = np.zeros((xb.shape[1], y.shape[1]))
    reg_mask = np.ones_like(w)
    reg_mask[-1] = 0.0                      # bias row unregularized
    for _ in range(epochs):
        p = _sigmoid(xb @ w)
        grad = xb.T @ (p - y) / n + l2 * reg_mask * w
        w -= lr * grad
    return w


def logistic_scores(w, x):
    xb = np.hstack([x, np.ones((x.shape[0], 1))])
    return _sigmoid(xb @ w)


def _standardize(train, *others):
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std[std < 1e-12] = 1.0
    return tuple((m - mean) / std for m in (train, *others))


def micro_macro_f1(true_sets, pred_sets, n_labels):
    """Set-valued micro and macro F1 over n_labels classes."""
    tp = np.zeros(n_labels)
    fp = np.zeros(n_labels)
    fn = np.zeros(n_labels)
    for truth, pred in zip(true_sets, pred_sets):
        for lab in pred:
            if lab in truth:
                tp[lab] += 1
            else:
                fp[lab] += 1
        for lab in truth - pred:
            fn[lab] += 1
    per_class = np.zeros(n_labels)
    for lab in range(n_labels):
        denom = 2 * tp[lab] + fp[lab] + fn[lab]
        per_class[lab] = 2 * tp[lab] / denom if denom > 0 else 0.0
    macro = float(per_class.mean()) if n_labels else 0.0
    denom = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / denom) if denom > 0 else 0.0
    return macro, micro


def rank_auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC with average ranks for ties."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise TooFewEdges("AUC needs at least one positive and one negative")
    ranks = rankdata(np.concatenate([pos, neg]))
    r_pos = ranks[: pos.size].sum()
    return float((r_pos - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size))


def _stratified_split(node_ids, strata, fraction, rng):
    """Per-stratum shuffle keeping at least one node on each side."""
    groups: dict[int, list[int]] = {}
    for v, s in zip(node_ids, strata):
        groups.setdefault(s, []).append(v)
    train, test = [], []
    for s in sorted(groups):
        members = sorted(groups[s])
        members = [members[i] for i in rng.permutation(len(members))]
        cut = int(round(fraction * len(members)))
        cut = min(max(cut, 1), len(members) - 1)
        train.extend(members[:cut])
        test.extend(members[cut:])
    return train, test


def node_classification_eval(embeddings: dict[int, np.ndarray], labels, cfg: EvalConfig, seed) -> tuple[float, float]:
    """Mean (macro_f1, micro_f1) over five seeded stratified 70/30 splits.

    One-vs-rest logistic classifiers are trained on standardized embeddings.
    Single-label data is scored by arg-max; genuinely multi-label data by a
    0.5 threshold per label (arg-max fallback when nothing clears it).
    """
    labeled = sorted(v for v in labels if v in embeddings and labels[v])
    if not labeled:
        raise InsufficientLabels("no labeled nodes with embeddings")
    label_ids = sorted({lab for v in labeled for lab in labels[v]})
    lab_index = {lab: i for i, lab in enumerate(label_ids)}
    n_labels = len(label_ids)
    if n_labels < 2:
        raise InsufficientLabels(f"need >=2 classes, got {n_labels}")
    counts = {lab: 0 for lab in label_ids}
    for v in labeled:
        for lab in labels[v]:
            counts[lab] += 1
    thin = [lab for lab, c in counts.items() if c < 2]
    if thin:
        raise InsufficientLabels(f"classes with fewer than 2 labeled nodes: {thin}")

    multilabel = any(len(labels[v]) > 1 for v in labeled)
    x_all = np.array([embeddings[v] for v in labeled])
    y_all = np.zeros((len(labeled), n_labels))
    true_sets = []
    for i, v in enumerate(labeled):
        idx = {lab_index[lab] for lab in labels[v]}
        true_sets.append(idx)
        for j in idx:
            y_all[i, j] = 1.0
    strata = [min(s) for s in true_sets]
    row_of = {v: i for i, v in enumerate(labeled)}

    macros, micros = [], []
    for run in range(EVAL_RUNS):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, run]))
        train_ids, test_ids = _stratified_split(labeled, strata, cfg.train_fraction, rng)
        tr = [row_of[v] for v in train_ids]
        te = [row_of[v] for v in test_ids]
        x_tr, x_te = _standardize(x_all[tr], x_all[te])
        w = train_logistic(x_tr, y_all[tr], cfg.classifier_epochs, cfg.classifier_lr)
        probs = logistic_scores(w, x_te)
        preds = []
        for row in probs:
            if multilabel:
                chosen = {j for j in range(n_labels) if row[j] >= 0.5}
                if not chosen:
                    chosen = {int(np.argmax(row))}
            else:
                chosen = {int(np.argmax(row))}
            preds.append(chosen)
        macro, micro = micro_macro_f1([true_sets[i] for i in te], preds, n_labels)
        macros.append(macro)
        micros.append(micro)
    return float(np.mean(macros)), float(np.mean(micros))


# --- link prediction -----------------------------------------------------------


def unique_pairs(g: HinGraph) -> list[tuple[int, int]]:
    """Distinct undirected node pairs with at least one edge, no self-pairs."""
    pairs = {(min(s, d), max(s, d)) for s, d, _ in g.edges if s != d}
    return sorted(pairs)


def split_links(g: HinGraph, fraction: float, rng) -> tuple[HinGraph, list[tuple[int, int]]]:
    """Hide a fraction of node pairs; every parallel edge of a hidden pair goes.

    Returns a graph over the same node universe, so nodes isolated by the
    split survive, plus the hidden pair list.
    """
    pairs = unique_pairs(g)
    if len(pairs) < 10:
        raise TooFewEdges(f"need >=10 edges to split, got {len(pairs)}")
    n_hide = max(1, int(round(fraction * len(pairs))))
    n_hide = min(n_hide, len(pairs) - 1)
    hide_idx = set(rng.choice(len(pairs), size=n_hide, replace=False).tolist())
    hidden = {pairs[i] for i in hide_idx}
    kept_edges = [
        (s, d, r) for s, d, r in g.edges
        if (min(s, d), max(s, d)) not in hidden
    ]
    train = HinGraph(
        nodes=dict(g.nodes),
        edges=kept_edges,
        features=g.features,
        labels=g.labels,
        relation_count=g.relation_count,
        node_type_count=g.node_type_count,
        node_names=g.node_names,
        type_names=g.type_names,
        relation_names=g.relation_names,
        label_names=g.label_names,
    ).finalize()
    return train, sorted(hidden)


def sample_negative_pairs(g: HinGraph, count: int, rng, exclude=()) -> list[tuple[int, int]]:
    """Uniform node pairs that are not edges of g, not self-pairs, not excluded."""
    n = len(g.nodes)
    true_pairs = set(unique_pairs(g))
    banned = true_pairs | set(exclude)
    picked: list[tuple[int, int]] = []
    seen = set()
    attempts = 0
    limit = 100 * count + 1000
    while len(picked) < count and attempts < limit:
        i, j = (int(v) for v in rng.integers(0, n, size=2))
        attempts += 1
        if i == j:
            continue
        pair = (min(i, j), max(i, j))
        if pair in banned or pair in seen:
            continue
        seen.add(pair)
        picked.append(pair)
    if len(picked) < count:
        raise TooFewEdges("could not sample enough negative pairs")
    return picked


def _hadamard(embeddings, pairs):
    return np.array([embeddings[a] * embeddings[b] for a, b in pairs])


def score_link_split(g: HinGraph, embeddings, train_pairs, test_pairs, cfg: EvalConfig, rng) -> float:
    """Train a linear scorer on Hadamard pair features; AUC on the test pairs."""
    neg = sample_negative_pairs(g, len(train_pairs) + len(test_pairs), rng, exclude=test_pairs)
    train_neg = neg[: len(train_pairs)]
    test_neg = neg[len(train_pairs):]

    x_tr = np.vstack([_hadamard(embeddings, train_pairs), _hadamard(embeddings, train_neg)])
    y_tr = np.zeros((x_tr.shape[0], 1))
    y_tr[: len(train_pairs), 0] = 1.0
    x_te_pos = _hadamard(embeddings, test_pairs)
    x_te_neg = _hadamard(embeddings, test_neg)
    x_tr, x_te_pos, x_te_neg = _standardize(x_tr, x_te_pos, x_te_neg)
    w = train_logistic(x_tr, y_tr, cfg.classifier_epochs, cfg.classifier_lr)
    return rank_auc(logistic_scores(w, x_te_pos)[:, 0], logistic_scores(w, x_te_neg)[:, 0])


def link_prediction_eval(g: HinGraph, embeddings: dict[int, np.ndarray], cfg: EvalConfig, seed) -> float:
    """Mean AUC over five seeded hide-and-score iterations.

    This standalone form scores fixed embeddings; inside the pipeline the
    hiding happens before any training so hidden pairs never leak.
    """
    if len(unique_pairs(g)) < 10:
        raise TooFewEdges("need >=10 edges for link prediction")
    aucs = []
    for run in range(EVAL_RUNS):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 7000 + run]))
        _, hidden = split_links(g, cfg.hidden_link_fraction, rng)
        train_pairs = [p for p in unique_pairs(g) if p not in set(hidden)]
        aucs.append(score_link_split(g, embeddings, train_pairs, hidden, cfg, rng))
    return float(np.mean(aucs))
