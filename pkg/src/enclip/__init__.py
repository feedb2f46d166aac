"""Ensemble multimodal search: fuse top-k retrievals from several embedding
checkpoints, score candidates by occurrence frequency and epoch-weighted votes,
and rank them through a cluster-guided selection loop."""

__version__ = "0.1.0"

from enclip.corpus import EmbeddingMatrix, ModelSet, ingest_text, open_model_set, read_store, write_store
from enclip.search import RetrievalHit, cosine_topk, multi_model_retrieve
from enclip.ranker import (
    CandidateEntry,
    CandidatePool,
    RankedResult,
    build_candidate_pool,
    enclip_rank,
    select_heads,
    weighted_score,
)
from enclip.dimred import Projection2D, TsneParams, trustworthiness, tsne_2d
from enclip.cluster import ClusterAssignment, kmeans, select_k, silhouette
from enclip.pipeline import PipelineConfig, run_pipeline
from enclip.evalkit import (
    EvalReport,
    FixtureSpec,
    average_precision_at_k,
    mean_average_precision,
    precision_at_k,
    run_eval,
    synth_fixture,
)

__all__ = [
    "EmbeddingMatrix",
    "ModelSet",
    "ingest_text",
    "open_model_set",
    "read_store",
    "write_store",
    "RetrievalHit",
    "cosine_topk",
    "multi_model_retrieve",
    "CandidateEntry",
    "CandidatePool",
    "RankedResult",
    "build_candidate_pool",
    "weighted_score",
    "select_heads",
    "enclip_rank",
    "TsneParams",
    "Projection2D",
    "tsne_2d",
    "trustworthiness",
    "ClusterAssignment",
    "kmeans",
    "silhouette",
    "select_k",
    "PipelineConfig",
    "run_pipeline",
    "EvalReport",
    "FixtureSpec",
    "precision_at_k",
    "average_precision_at_k",
    "mean_average_precision",
    "run_eval",
    "synth_fixture",
]
