"""Ensemble candidate pooling and cluster-guided selection.

Candidates from all checkpoints are pooled into one latent space.  Each
distinct item gets a frequency (how many checkpoints retrieved it) and an
epoch-weighted vote

    weighted_score = sum over occurring models n of 0.1 * 2**n

where n is the model's position in epoch order, so later checkpoints count
double their predecessor.  The final ranking walks the most frequent items as
"heads": every cluster containing a point of the current head is opened, its
items are ranked by the configured comparator, and the loop repeats until N
items are selected.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from enclip.corpus import ModelSet
from enclip.cluster import ClusterAssignment
from enclip.search import RetrievalHit

COMPARATORS = ("freq_then_ws", "ws_only", "freq_times_ws")
DEFAULT_COMPARATOR = "freq_then_ws"


def weighted_score(occurrence: Sequence[bool]) -> float:
    """Epoch-weighted ensemble vote over a z-length occurrence vector.

    Summation order is fixed ascending in n so results are reproducible
    bit-for-bit.
    """
    if len(occurrence) < 1:
        raise ValueError("occurrence vector must have at least one entry")
    total = 0.0
    for n, occ in enumerate(occurrence):
        if occ:
            total += 0.1 * (2.0**n)
    return total


@dataclass
class PoolPoint:
    """One (model, item) occurrence carrying that model's embedding of the item."""

    item_id: str
    model_index: int
    similarity: float
    embedding: np.ndarray


@dataclass
class CandidateEntry:
    item_id: str
    occurrence: list[bool]
    frequency: int
    weighted_score: float
    best_similarity: float
    points: list[PoolPoint]


@dataclass
class CandidatePool:
    """Union of the per-model top-k hits, keyed by item.

    ``all_points`` flattens every entry's points (entries in first-retrieval
    order, points by model index); downstream projections and cluster labels
    are index-aligned with it.
    """

    entries: dict[str, CandidateEntry]
    z: int
    all_points: list[PoolPoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def point_matrix(self) -> np.ndarray:
        return np.vstack([p.embedding for p in self.all_points])


@dataclass
class RankedItem:
    item_id: str
    frequency: int
    weighted_score: float
    best_similarity: float


@dataclass
class RankDiagnostics:
    coords: np.ndarray  # (P, 2), aligned with pool.all_points
    labels: list[int]
    chosen_k: int
    silhouette: float
    head_cluster_ids: list[list[int]]  # per consumed head
    point_items: list[str]
    point_models: list[int]
    point_similarities: list[float]


@dataclass
class RankedResult:
    items: list[RankedItem]
    head_sequence: list[str]
    diagnostics: RankDiagnostics | None = None


def build_candidate_pool(hit_lists: Sequence[Sequence[RetrievalHit]], model_set: ModelSet) -> CandidatePool:
    """Fold z per-model hit lists into one pool with frequencies and votes.

    Occurrence is binary per model (an item appears at most once per top-k
    list), so an item contributes exactly one point per model that retrieved
    it.
    """
    z = model_set.z
    if len(hit_lists) != z:
        raise ValueError(f"expected {z} hit lists, got {len(hit_lists)}")
    if all(len(hl) == 0 for hl in hit_lists):
        raise ValueError("empty pool: no model returned any hit")

    entries: dict[str, CandidateEntry] = {}
    for n, hits in enumerate(hit_lists):
        matrix = model_set.models[n]
        for hit in hits:
            try:
                embedding = matrix.vector_for(hit.item_id)
            except KeyError:
                raise ValueError(f"hit {hit.item_id!r} is not in the corpus") from None
            entry = entries.get(hit.item_id)
            if entry is None:
                entry = CandidateEntry(
                    item_id=hit.item_id,
                    occurrence=[False] * z,
                    frequency=0,
                    weighted_score=0.0,
                    best_similarity=-np.inf,
                    points=[],
                )
                entries[hit.item_id] = entry
            if entry.occurrence[n]:
                raise ValueError(f"item {hit.item_id!r} appears twice in model {n}'s list")
            entry.occurrence[n] = True
            entry.points.append(
                PoolPoint(item_id=hit.item_id, model_index=n, similarity=hit.similarity, embedding=embedding)
            )

    all_points: list[PoolPoint] = []
    for entry in entries.values():
        entry.frequency = sum(entry.occurrence)
        entry.weighted_score = weighted_score(entry.occurrence)
        entry.best_similarity = max(p.similarity for p in entry.points)
        entry.points.sort(key=lambda p: p.model_index)
        all_points.extend(entry.points)
    return CandidatePool(entries=entries, z=z, all_points=all_points)


def _head_key(entry: CandidateEntry) -> tuple:
    # Heads are ordered by frequency; the remaining keys only break ties
    # deterministically.
    return (-entry.frequency, -entry.weighted_score, -entry.best_similarity, entry.item_id)


def entry_sort_key(comparator: str) -> Callable[[CandidateEntry], tuple]:
    """Ranking comparator for items within a head-cluster batch."""
    if comparator == "freq_then_ws":
        return lambda e: (-e.frequency, -e.weighted_score, -e.best_similarity, e.item_id)
    if comparator == "ws_only":
        return lambda e: (-e.weighted_score, -e.best_similarity, e.item_id)
    if comparator == "freq_times_ws":
        return lambda e: (-(e.frequency * e.weighted_score), -e.best_similarity, e.item_id)
    raise ValueError(f"unknown comparator {comparator!r}; options: {COMPARATORS}")


def select_heads(pool: CandidatePool) -> list[str]:
    """All pool items ordered by descending frequency (ties broken deterministically)."""
    if not pool.entries:
        raise ValueError("cannot select heads from an empty pool")
    return [e.item_id for e in sorted(pool.entries.values(), key=_head_key)]


def enclip_rank(
    pool: CandidatePool,
    clusters: ClusterAssignment,
    n: int,
    comparator: str = DEFAULT_COMPARATOR,
    coords: np.ndarray | None = None,
) -> RankedResult:
    """Cluster-guided selection loop over the candidate pool.

    Heads are visited in frequency order.  A head's clusters are every cluster
    containing any of its points (an item occurs as up to z points, so it may
    inhabit several).  All items with at least one point in a head cluster are
    ranked by the comparator and appended; the loop stops once n items are
    selected or heads run out, which can only leave a short result when the
    pool itself is smaller than n.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    labels = list(clusters.labels)
    if len(labels) != len(pool.all_points):
        raise ValueError(
            f"cluster labels cover {len(labels)} points but the pool has {len(pool.all_points)}"
        )

    item_clusters: dict[str, set[int]] = defaultdict(set)
    cluster_items: dict[int, set[str]] = defaultdict(set)
    for point, label in zip(pool.all_points, labels):
        item_clusters[point.item_id].add(label)
        cluster_items[label].add(point.item_id)

    heads = select_heads(pool)
    key = entry_sort_key(comparator)

    selected: list[str] = []
    chosen: set[str] = set()
    head_sequence: list[str] = []
    head_cluster_ids: list[list[int]] = []
    i = 0
    while len(selected) < n and i < len(heads):
        head = heads[i]
        head_sequence.append(head)
        head_clusters = sorted(item_clusters[head])
        head_cluster_ids.append(head_clusters)
        gathered: set[str] = set()
        for c in head_clusters:
            gathered |= cluster_items[c]
        for item_id in sorted(gathered, key=lambda iid: key(pool.entries[iid])):
            if item_id not in chosen:
                chosen.add(item_id)
                selected.append(item_id)
        i += 1

    items = [
        RankedItem(
            item_id=iid,
            frequency=pool.entries[iid].frequency,
            weighted_score=pool.entries[iid].weighted_score,
            best_similarity=pool.entries[iid].best_similarity,
        )
        for iid in selected[:n]
    ]
    if coords is None:
        coords = np.zeros((len(pool.all_points), 2), dtype=np.float64)
    diagnostics = RankDiagnostics(
        coords=np.asarray(coords, dtype=np.float64),
        labels=labels,
        chosen_k=clusters.k,
        silhouette=clusters.silhouette,
        head_cluster_ids=head_cluster_ids,
        point_items=[p.item_id for p in pool.all_points],
        point_models=[p.model_index for p in pool.all_points],
        point_similarities=[p.similarity for p in pool.all_points],
    )
    return RankedResult(items=items, head_sequence=head_sequence, diagnostics=diagnostics)
