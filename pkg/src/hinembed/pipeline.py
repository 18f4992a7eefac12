"""End-to-end orchestration: load, partition, embed, align, evaluate, write.

Every stage is a pure function of its inputs and a seed derived from the
pipeline seed, so outputs are byte-identical across runs and across executor
counts. Workers never share parameters; each one receives its own config
whose seed is the pipeline seed xor the partition id.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .align import AlignmentReport, align_all, aggregate_contexts, write_alignment_report
from .concurrency import run_tasks
from .errors import HinError, NoCrossPartitionNodes, PipelineError
from .evaluate import (
    EvalConfig,
    link_prediction_eval,
    node_classification_eval,
    score_link_split,
    split_links,
    unique_pairs,
)
from .hin import DEFAULT_FALLBACK_DIM, HinGraph, Partition, load_hin
from .hypergraph import Bucket, dump_hyperedges, generate_hyperedges
from .infomax import EmbeddingMatrix, WorkerConfig, train_worker_traced, write_loss_trace, write_worker_embeddings
from .partition import (
    AnchorNetwork,
    PartitionBounds,
    avg_neighborhood_loss,
    extract_anchor_network,
    partition as build_partitions,
    write_anchor_manifest,
    write_partition_manifest,
)

log = logging.getLogger(__name__)

ANCHOR_ID = -1
_SPLIT_TAG = 101
_PACK_TAG = 202
_CLS_TAG = 303
_LINK_TAG = 404
_ANCHOR_TAG = 505


def derive_seed(seed, tag) -> int:
    """Stable 32-bit stream seed for a pipeline stage."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, tag]).generate_state(1)[0])


@dataclass
class PipelinePaths:
    edges: str
    features: str | None = None
    labels: str | None = None
    out_dir: str = "out"


@dataclass
class PipelineConfig:
    paths: PipelinePaths
    bounds: PartitionBounds = field(default_factory=PartitionBounds)
    worker: WorkerConfig = field(default_factory=WorkerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    executor_count: int = 1
    seed: int = 0
    eval_links: bool = False
    fallback_feature_dim: int = DEFAULT_FALLBACK_DIM

    def __post_init__(self):
        if self.executor_count < 1:
            raise ValueError("executor_count must be >= 1")


@dataclass
class PipelineResult:
    embeddings: dict[int, np.ndarray]
    report: dict
    graph: HinGraph
    train_graph: HinGraph
    buckets: list[Bucket]
    partitions: list[Partition]
    anchor: AnchorNetwork | None
    partition_embeddings: list[EmbeddingMatrix]
    anchor_embedding: EmbeddingMatrix | None
    losses: dict[int, list[float]]
    alignment: list[AlignmentReport]
    hidden_pairs: list[tuple[int, int]]


def _stage(tag, fn):
    try:
        return fn()
    except PipelineError:
        raise
    except HinError as exc:
        raise PipelineError(tag, exc) from exc


def _anchor_as_partition(anchor: AnchorNetwork) -> Partition:
    return Partition(
        id=ANCHOR_ID,
        node_ids=anchor.node_ids,
        local_index=anchor.local_index,
        adjacency=anchor.adjacency,
        features=anchor.features,
        origin_relations=set(),
    )


def _train_all(cfg: PipelineConfig, partitions, anchor):
    def job(p, seed):
        worker_cfg = dataclasses.replace(cfg.worker, seed=seed)
        return train_worker_traced(p, worker_cfg)

    jobs = [lambda p=p: job(p, cfg.seed ^ p.id) for p in partitions]
    if anchor is not None:
        jobs.append(lambda: job(_anchor_as_partition(anchor), derive_seed(cfg.seed, _ANCHOR_TAG)))
    results = run_tasks(jobs, max_workers=cfg.executor_count)

    part_embs = [emb for emb, _ in results[: len(partitions)]]
    losses = {emb.partition_id: trace for emb, trace in results[: len(partitions)]}
    anchor_emb = None
    if anchor is not None:
        anchor_emb, anchor_losses = results[-1]
        losses[ANCHOR_ID] = anchor_losses
    return part_embs, anchor_emb, losses


def run_pipeline(cfg: PipelineConfig, write_outputs: bool = True) -> tuple[dict[int, np.ndarray], dict]:
    """Execute every stage in order; returns (final embeddings, metrics).

    With ``eval_links`` the link split happens before any training so hidden
    pairs never influence partitioning, workers, alignment, or the scorer.
    Artifacts are only written after all compute stages succeed; a failure
    while writing removes everything written so far.
    """
    result = execute(cfg)
    if write_outputs:
        write_artifacts(cfg, result)
    return result.embeddings, result.report


def execute(cfg: PipelineConfig) -> PipelineResult:
    g = _stage("load", lambda: load_hin(cfg.paths.edges, cfg.paths.features, cfg.paths.labels))

    hidden: list[tuple[int, int]] = []
    g_train = g
    if cfg.eval_links:
        rng = np.random.default_rng(derive_seed(cfg.seed, _SPLIT_TAG))
        g_train, hidden = _stage("link-split", lambda: split_links(g, cfg.eval.hidden_link_fraction, rng))
        assert not set(unique_pairs(g_train)) & set(hidden), "hidden pairs leaked into the training graph"

    buckets = _stage("hypergraph", lambda: generate_hyperedges(g_train, max_workers=cfg.executor_count))
    partitions = _stage(
        "partition",
        lambda: build_partitions(
            g_train,
            buckets,
            cfg.bounds,
            derive_seed(cfg.seed, _PACK_TAG),
            max_workers=cfg.executor_count,
            fallback_dim=cfg.fallback_feature_dim,
        ),
    )

    anchor = None
    if len(partitions) >= 2:
        try:
            anchor = extract_anchor_network(g_train, partitions, cfg.bounds, fallback_dim=cfg.fallback_feature_dim)
        except NoCrossPartitionNodes:
            log.warning("partitions are fully disconnected; falling back to standalone embeddings")

    part_embs, anchor_emb, losses = _stage("embed", lambda: _train_all(cfg, partitions, anchor))

    def align_stage():
        if anchor_emb is not None:
            return align_all(part_embs, anchor_emb, anchor, max_workers=cfg.executor_count)
        contexts: dict[int, list[np.ndarray]] = {}
        for emb in part_embs:
            for i, v in enumerate(emb.node_ids):
                contexts.setdefault(v, []).append(emb.z[i])
        reports = [AlignmentReport(e.partition_id, 0, 0.0, 1.0, True) for e in part_embs]
        return aggregate_contexts(contexts), reports

    final, reports = _stage("align", align_stage)

    report = _stage("eval", lambda: _evaluate(cfg, g, g_train, partitions, anchor, final, hidden, losses, reports))
    return PipelineResult(
        embeddings=final,
        report=report,
        graph=g,
        train_graph=g_train,
        buckets=buckets,
        partitions=partitions,
        anchor=anchor,
        partition_embeddings=part_embs,
        anchor_embedding=anchor_emb,
        losses=losses,
        alignment=reports,
        hidden_pairs=hidden,
    )


def _evaluate(cfg, g, g_train, partitions, anchor, final, hidden, losses, reports) -> dict:
    macro = micro = auc = None
    if g.labels:
        macro, micro = node_classification_eval(final, g.labels, cfg.eval, derive_seed(cfg.seed, _CLS_TAG))
    if hidden:
        train_pairs = unique_pairs(g_train)
        assert not set(train_pairs) & set(hidden), "hidden pairs reached scorer training"
        rng = np.random.default_rng(derive_seed(cfg.seed, _LINK_TAG))
        auc = score_link_split(g, final, train_pairs, hidden, cfg.eval, rng)

    per_partition = []
    report_by_id = {r.partition_id: r for r in reports}
    for p in partitions:
        r = report_by_id.get(p.id)
        trace = losses.get(p.id, [])
        per_partition.append(
            {
                "id": p.id,
                "nodes": len(p.node_ids),
                "origin_relations": sorted(p.origin_relations),
                "mu": r.mu if r else 0,
                "residual": r.residual if r else None,
                "scale": r.scale if r else None,
                "final_loss": trace[-1] if trace else None,
                "epochs": len(trace),
            }
        )
    return {
        "macro_f1": macro,
        "micro_f1": micro,
        "auc": auc,
        "avg_neighborhood_loss": avg_neighborhood_loss(g_train, partitions),
        "partitions": len(partitions),
        "anchor_nodes": anchor.size if anchor else 0,
        "hidden_pairs": len(hidden),
        "per_partition": per_partition,
    }


def write_artifacts(cfg: PipelineConfig, result: PipelineResult) -> list[Path]:
    """Write all output files; removes partial output when a write fails."""
    out = Path(cfg.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = result.graph
    written: list[Path] = []

    def target(name) -> Path:
        path = out / name
        written.append(path)
        return path

    try:
        write_embeddings_tsv(result.embeddings, target("embeddings.tsv"), g.node_name)
        write_partition_manifest(g, result.partitions, target("partition_manifest.tsv"))
        if result.anchor is not None:
            write_anchor_manifest(g, result.anchor, target("anchor_manifest.tsv"))
        dump_hyperedges(result.buckets, target("hyperedges.tsv"))
        write_worker_embeddings(result.partition_embeddings, target("worker_embeddings.tsv"), g.node_name)
        write_alignment_report(result.alignment, target("alignment_report.tsv"))
        for pid, trace in sorted(result.losses.items()):
            name = "loss_anchor.csv" if pid == ANCHOR_ID else f"loss_p{pid}.csv"
            write_loss_trace(trace, target(name))
        with open(target("metrics.json"), "w", encoding="utf-8") as fh:
            json.dump(result.report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


def write_embeddings_tsv(embeddings: dict[int, np.ndarray], path, name_of=str) -> None:
    """Final aggregated embeddings: node id then comma-joined vector."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in sorted(embeddings):
            row = ",".join(format(x, ".17g") for x in embeddings[v])
            fh.write(f"{name_of(v)}\t{row}\n")


def read_embeddings_tsv(path, id_of=None) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            name, row = line.split("\t")
            key = id_of(name) if id_of else name
            out[key] = np.array([float(x) for x in row.split(",")])
    return out


def evaluate_existing(cfg: PipelineConfig, embeddings_path) -> dict:
    """Score previously written embeddings against labels and links."""
    g = load_hin(cfg.paths.edges, cfg.paths.features, cfg.paths.labels)
    name_to_id = {name: i for i, name in enumerate(g.node_names)}
    embeddings = read_embeddings_tsv(embeddings_path, id_of=lambda n: name_to_id[n])
    macro = micro = auc = None
    if g.labels:
        macro, micro = node_classification_eval(embeddings, g.labels, cfg.eval, derive_seed(cfg.seed, _CLS_TAG))
    if cfg.eval_links:
        auc = link_prediction_eval(g, embeddings, cfg.eval, derive_seed(cfg.seed, _LINK_TAG))
    return {"macro_f1": macro, "micro_f1": micro, "auc": auc}
