"""Exact cosine top-k retrieval against one or all checkpoints.

Deliberately an exhaustive scan: corpora at the tens-of-thousands scale score
in milliseconds, and approximate indexes would add nondeterminism that breaks
the reproducibility of the downstream selection loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from enclip.corpus import EmbeddingMatrix, ModelSet

DEFAULT_TOP_K = 20


@dataclass(frozen=True)
class RetrievalHit:
    item_id: str
    model_index: int
    similarity: float
    rank: int  # 1-based within the model's list


def _normalize_query(query: np.ndarray, dim: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != dim:
        raise ValueError(f"query has {q.shape[0]} components, expected {dim}")
    if not np.all(np.isfinite(q)):
        raise ValueError("query contains non-finite components")
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("query vector has zero norm")
    return q / norm


def cosine_topk(
    matrix: EmbeddingMatrix, query: np.ndarray, k: int, model_index: int = 0
) -> list[RetrievalHit]:
    """Top-k items by cosine similarity, descending; ties broken by item_id.

    The tie-break gives a total order, so results do not depend on corpus
    record order.  If k exceeds the corpus size all items are returned.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if not matrix.normalized:
        raise ValueError("cosine_topk requires a normalized matrix")
    q = _normalize_query(query, matrix.dim)
    sims = matrix.vectors.astype(np.float64) @ q
    k = min(k, len(matrix))
    order = sorted(range(len(matrix)), key=lambda i: (-sims[i], matrix.item_ids[i]))[:k]
    return [
        RetrievalHit(
            item_id=matrix.item_ids[i],
            model_index=model_index,
            similarity=float(sims[i]),
            rank=rank,
        )
        for rank, i in enumerate(order, start=1)
    ]


def multi_model_retrieve(
    model_set: ModelSet, query_vectors: Sequence[np.ndarray], k: int
) -> list[list[RetrievalHit]]:
    """One independent top-k list per checkpoint.

    Each checkpoint has its own text encoder, so callers supply one query
    vector per model, index-aligned with the set's epoch order.
    """
    if len(query_vectors) != model_set.z:
        raise ValueError(
            f"expected {model_set.z} query vectors (one per model), got {len(query_vectors)}"
        )
    return [
        cosine_topk(matrix, query_vectors[n], k, model_index=n)
        for n, matrix in enumerate(model_set)
    ]
