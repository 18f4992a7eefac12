"""Command-line surface over the pipeline.

Config resolution order: built-in defaults, then the JSON config file, then
explicit flags. Exit codes: 0 success, 1 pipeline error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import HinError
from .evaluate import EvalConfig
from .hin import load_hin
from .hypergraph import bucket_stats, dump_hyperedges, generate_hyperedges
from .infomax import WorkerConfig, write_loss_trace, write_worker_embeddings
from .partition import (
    PartitionBounds,
    avg_neighborhood_loss,
    partition as build_partitions,
    read_manifest_node_sets,
    write_partition_manifest,
)
from .pipeline import (
    PipelineConfig,
    PipelinePaths,
    derive_seed,
    evaluate_existing,
    execute,
    run_pipeline,
    write_artifacts,
)

log = logging.getLogger(__name__)

_DEFAULTS = {
    "edges": None,
    "features": None,
    "labels": None,
    "out": "out",
    "seed": 0,
    "workers": 1,
    "dim": 32,
    "layers": 1,
    "epochs": 100,
    "lr": 0.01,
    "patience": 20,
    "corruption_rate": 0.1,
    "lower_bound": 200,
    "upper_bound": 800,
    "fallback_feature_dim": 64,
    "train_fraction": 0.7,
    "hidden_link_fraction": 0.2,
    "classifier_epochs": 300,
    "classifier_lr": 0.5,
    "eval_links": False,
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; explicit flags win")
    sub.add_argument("--edges", help="edge TSV input")
    sub.add_argument("--features", help="optional feature TSV")
    sub.add_argument("--labels", help="optional label TSV")
    sub.add_argument("--out", help="output directory (default: out)")
    sub.add_argument("--seed", type=int, help="pipeline seed")
    sub.add_argument("--workers", type=int, help="max concurrent executors")
    sub.add_argument("--dim", type=int, help="embedding width")
    sub.add_argument("--layers", type=int, help="encoder depth")
    sub.add_argument("--epochs", type=int, help="max training epochs per worker")
    sub.add_argument("--lr", type=float, help="worker learning rate")
    sub.add_argument("--patience", type=int, help="early-stop window")
    sub.add_argument("--corruption-rate", type=float, dest="corruption_rate")
    sub.add_argument("--lower-bound", type=int, dest="lower_bound")
    sub.add_argument("--upper-bound", type=int, dest="upper_bound")
    sub.add_argument("--fallback-feature-dim", type=int, dest="fallback_feature_dim")
    sub.add_argument("--eval-links", action="store_const", const=True, dest="eval_links",
                     help="hide a link fraction before training and report AUC")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hinembed", description=__doc__)
    subs = p.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "full pipeline: partition, embed, align, evaluate"),
        ("partition", "stop after partitioning; write manifests"),
        ("embed", "stop after worker training; write per-partition embeddings"),
        ("align", "full pipeline without evaluation"),
        ("eval", "score previously written embeddings"),
        ("quality", "neighborhood-loss percentage of a partition manifest"),
    ]:
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        if name == "eval":
            sub.add_argument("--embeddings", help="embedding TSV (default: <out>/embeddings.tsv)")
        if name == "quality":
            sub.add_argument("--manifest", help="partition manifest TSV (default: <out>/partition_manifest.tsv)")
    return p


def _resolve(args: argparse.Namespace) -> dict:
    merged = dict(_DEFAULTS)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(_DEFAULTS)
        if unknown:
            raise HinError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key in _DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _pipeline_config(opts: dict) -> PipelineConfig:
    if not opts["edges"]:
        raise _UsageError("an edge file is required (--edges or config 'edges')")
    return PipelineConfig(
        paths=PipelinePaths(
            edges=opts["edges"],
            features=opts["features"],
            labels=opts["labels"],
            out_dir=opts["out"],
        ),
        bounds=PartitionBounds(opts["lower_bound"], opts["upper_bound"]),
        worker=WorkerConfig(
            dim=opts["dim"],
            layers=opts["layers"],
            epochs=opts["epochs"],
            lr=opts["lr"],
            corruption_rate=opts["corruption_rate"],
            patience=opts["patience"],
            seed=opts["seed"],
        ),
        eval=EvalConfig(
            train_fraction=opts["train_fraction"],
            hidden_link_fraction=opts["hidden_link_fraction"],
            classifier_epochs=opts["classifier_epochs"],
            classifier_lr=opts["classifier_lr"],
        ),
        executor_count=opts["workers"],
        seed=opts["seed"],
        eval_links=bool(opts["eval_links"]),
        fallback_feature_dim=opts["fallback_feature_dim"],
    )


class _UsageError(Exception):
    pass


def _cmd_run(cfg: PipelineConfig) -> int:
    _, report = run_pipeline(cfg)
    print(json.dumps({k: report[k] for k in ("macro_f1", "micro_f1", "auc", "avg_neighborhood_loss", "partitions")}))
    return 0


def _cmd_partition(cfg: PipelineConfig) -> int:
    g = load_hin(cfg.paths.edges, cfg.paths.features, cfg.paths.labels)
    buckets = generate_hyperedges(g, max_workers=cfg.executor_count)
    stats = bucket_stats(buckets)
    parts = build_partitions(
        g, buckets, cfg.bounds, derive_seed(cfg.seed, 202),
        max_workers=cfg.executor_count, fallback_dim=cfg.fallback_feature_dim,
    )
    out = Path(cfg.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_partition_manifest(g, parts, out / "partition_manifest.tsv")
    dump_hyperedges(buckets, out / "hyperedges.tsv")
    print(json.dumps({
        "buckets": len(buckets),
        "components": stats["count"],
        "largest_component": stats["largest"],
        "mean_component": stats["mean"],
        "partitions": len(parts),
        "avg_neighborhood_loss": avg_neighborhood_loss(g, parts),
    }))
    return 0


def _cmd_embed(cfg: PipelineConfig) -> int:
    result = execute(cfg)
    out = Path(cfg.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_worker_embeddings(result.partition_embeddings, out / "worker_embeddings.tsv", result.graph.node_name)
    write_partition_manifest(result.graph, result.partitions, out / "partition_manifest.tsv")
    for pid, trace in sorted(result.losses.items()):
        name = "loss_anchor.csv" if pid == -1 else f"loss_p{pid}.csv"
        write_loss_trace(trace, out / name)
    print(json.dumps({"partitions": len(result.partitions), "embedded_nodes": sum(len(e.node_ids) for e in result.partition_embeddings)}))
    return 0


def _cmd_align(cfg: PipelineConfig) -> int:
    result = execute(cfg)
    write_artifacts(cfg, result)
    print(json.dumps({"partitions": len(result.partitions), "nodes": len(result.embeddings)}))
    return 0


def _cmd_eval(cfg: PipelineConfig, embeddings_path) -> int:
    path = embeddings_path or Path(cfg.paths.out_dir) / "embeddings.tsv"
    metrics = evaluate_existing(cfg, path)
    print(json.dumps(metrics))
    return 0


def _cmd_quality(cfg: PipelineConfig, manifest_path) -> int:
    path = manifest_path or Path(cfg.paths.out_dir) / "partition_manifest.tsv"
    g = load_hin(cfg.paths.edges, cfg.paths.features, cfg.paths.labels)
    node_sets = read_manifest_node_sets(g, path)
    loss = avg_neighborhood_loss(g, node_sets)
    print(f"avg_neighborhood_loss {loss:.2f}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:          # argparse printed usage already
        return int(exc.code or 0)

    try:
        opts = _resolve(args)
        cfg = _pipeline_config(opts)
        if args.command == "run":
            return _cmd_run(cfg)
        if args.command == "partition":
            return _cmd_partition(cfg)
        if args.command == "embed":
            return _cmd_embed(cfg)
        if args.command == "align":
            return _cmd_align(cfg)
        if args.command == "eval":
            return _cmd_eval(cfg, getattr(args, "embeddings", None))
        if args.command == "quality":
            return _cmd_quality(cfg, getattr(args, "manifest", None))
        raise _UsageError(f"unknown command {args.command}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except HinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
