"""Decentralized multi-relation network embedding.

Pipeline: split a typed graph into per-relation hyperedge buckets, contract
them into bounded overlapping partitions, train an independent
information-maximization worker per partition, then map every partition's
embedding space onto the anchor network's space with an extended orthogonal
Procrustes fit and average each node's aligned contexts.
"""

from .align import (
    AlignmentMap,
    AnchorPair,
    aggregate_contexts,
    align_all,
    apply_map,
    fit_procrustes,
)
from .errors import HinError
from .evaluate import EvalConfig, link_prediction_eval, node_classification_eval, rank_auc
from .hin import HinGraph, Partition, induce_partition, load_hin, neighborhood, relation_subgraph, save_hin
from .hypergraph import Bucket, Hyperedge, bucket_stats, connected_components, generate_hyperedges
from .infomax import (
    EmbeddingMatrix,
    WorkerConfig,
    WorkerParams,
    corrupt,
    dgi_loss,
    discriminator,
    gcn_forward,
    readout,
    train_worker,
)
from .partition import (
    AnchorNetwork,
    PartitionBounds,
    avg_neighborhood_loss,
    contract_buckets,
    extract_anchor_network,
    partition,
    score_and_match,
)
from .pipeline import PipelineConfig, PipelinePaths, run_pipeline
from .svd import jacobi_svd

__version__ = "0.1.0"

__all__ = [
    "AlignmentMap",
    "AnchorNetwork",
    "AnchorPair",
    "Bucket",
    "EmbeddingMatrix",
    "EvalConfig",
    "HinError",
    "HinGraph",
    "Hyperedge",
    "Partition",
    "PartitionBounds",
    "PipelineConfig",
    "PipelinePaths",
    "WorkerConfig",
    "WorkerParams",
    "aggregate_contexts",
    "align_all",
    "apply_map",
    "avg_neighborhood_loss",
    "bucket_stats",
    "connected_components",
    "contract_buckets",
    "corrupt",
    "dgi_loss",
    "discriminator",
    "extract_anchor_network",
    "fit_procrustes",
    "gcn_forward",
    "generate_hyperedges",
    "induce_partition",
    "jacobi_svd",
    "link_prediction_eval",
    "load_hin",
    "neighborhood",
    "node_classification_eval",
    "partition",
    "rank_auc",
    "readout",
    "relation_subgraph",
    "run_pipeline",
    "save_hin",
    "score_and_match",
    "train_worker",
]
