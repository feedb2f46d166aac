"""End-to-end query pipeline: retrieve per model, pool, project, cluster, rank."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from enclip.cluster import DEFAULT_K_MAX, DEFAULT_K_MIN, select_k
from enclip.corpus import ModelSet
from enclip.dimred import TsneParams, tsne_2d
from enclip.ranker import DEFAULT_COMPARATOR, CandidatePool, RankedResult, build_candidate_pool, enclip_rank
from enclip.search import DEFAULT_TOP_K, multi_model_retrieve


@dataclass
class PipelineConfig:
    top_k_per_model: int = DEFAULT_TOP_K
    n: int = 10
    k_min: int = DEFAULT_K_MIN
    k_max: int = DEFAULT_K_MAX
    seed: int = 0
    comparator: str = DEFAULT_COMPARATOR
    tsne: TsneParams = field(default_factory=TsneParams)


def run_pipeline(
    model_set: ModelSet, query_vectors: Sequence[np.ndarray], config: PipelineConfig | None = None
) -> tuple[RankedResult, CandidatePool]:
    """Run one query through the full ensemble pipeline.

    The request seed drives both the projection and the clustering, so a
    repeated request replays identical results.
    """
    config = config or PipelineConfig()
    hit_lists = multi_model_retrieve(model_set, query_vectors, config.top_k_per_model)
    pool = build_candidate_pool(hit_lists, model_set)
    projection = tsne_2d(pool.point_matrix(), dataclasses.replace(config.tsne, seed=config.seed))
    _, clusters = select_k(projection.coords, config.k_min, config.k_max, seed=config.seed)
    result = enclip_rank(pool, clusters, config.n, config.comparator, coords=projection.coords)
    return result, pool
