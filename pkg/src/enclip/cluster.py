"""K-means over the 2D projection, with silhouette-driven choice of K.

Lloyd's algorithm with k-means++ seeding and restarts.  The cluster count is
swept over a small range (4 to 6 by default) and the K with the best mean
silhouette wins; exact silhouette ties fall back to the larger relative
inertia drop (the elbow criterion) and then to the smaller K.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_K_MIN = 4
DEFAULT_K_MAX = 6
MAX_LLOYD_ITERS = 300
CENTROID_MOVE_TOL = 1e-6
N_RESTARTS = 10


@dataclass
class ClusterAssignment:
    labels: np.ndarray  # (N,) ints in [0, k)
    centroids: np.ndarray  # (k, d)
    inertia: float
    k: int
    silhouette: float
    seed: int


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1), d2


def _repair_empty(
    points: np.ndarray, labels: np.ndarray, centroids: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Reseed empty clusters to the point farthest from its own centroid.

    Keeps K constant, which the selection loop downstream assumes.  The grabbed
    point is force-assigned so repair terminates even with duplicate points.
    """
    labels = labels.copy()
    centroids = centroids.copy()
    for _ in range(k):
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            break
        own_d2 = ((points - centroids[labels]) ** 2).sum(axis=1)
        # never steal the last member of another cluster
        own_d2[counts[labels] <= 1] = -1.0
        grabbed = int(np.argmax(own_d2))
        target = int(empty[0])
        centroids[target] = points[grabbed]
        labels[grabbed] = target
    return labels, centroids


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, float]:
    n = points.shape[0]
    centroids = _kmeanspp_init(points, k, rng)
    prev_inertia = np.inf
    for _ in range(MAX_LLOYD_ITERS):
        labels, _ = _assign(points, centroids)
        labels, centroids = _repair_empty(points, labels, centroids, k)
        inertia = float(((points - centroids[labels]) ** 2).sum())
        assert inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12, "Lloyd inertia increased"
        prev_inertia = inertia
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            new_centroids[j] = points[labels == j].mean(axis=0)
        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if movement < CENTROID_MOVE_TOL:
            break
    labels, _ = _assign(points, centroids)
    labels, centroids = _repair_empty(points, labels, centroids, k)
    inertia = float(((points - centroids[labels]) ** 2).sum())
    assert inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12, "Lloyd inertia increased on final pass"
    return labels, centroids, inertia


def _canonicalize(labels: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relabel clusters in first-occurrence order so restart internals can't leak."""
    mapping: dict[int, int] = {}
    for lab in labels:
        if int(lab) not in mapping:
            mapping[int(lab)] = len(mapping)
    # clusters kept alive only by repair may never appear first; map leftovers last
    for j in range(centroids.shape[0]):
        if j not in mapping:
            mapping[j] = len(mapping)
    new_labels = np.array([mapping[int(lab)] for lab in labels], dtype=np.int64)
    new_centroids = np.empty_like(centroids)
    for old, new in mapping.items():
        new_centroids[new] = centroids[old]
    return new_labels, new_centroids


def kmeans(points: np.ndarray, k: int, seed: int) -> ClusterAssignment:
    """Best-of-restarts Lloyd's K-means, deterministic for a fixed seed."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2D array")
    n = points.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for child in np.random.SeedSequence(seed).spawn(N_RESTARTS):
        labels, centroids, inertia = _lloyd(points, k, np.random.default_rng(child))
        if best is None or inertia < best[2]:
            best = (labels, centroids, inertia)
    labels, centroids, inertia = best
    labels, centroids = _canonicalize(labels, centroids)
    sil = silhouette(points, labels) if k >= 2 and n >= 3 else 0.0
    return ClusterAssignment(
        labels=labels, centroids=centroids, inertia=inertia, k=k, silhouette=sil, seed=seed
    )


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean per-point (b - a) / max(a, b); singleton clusters contribute 0."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    n = points.shape[0]
    if n < 3:
        raise ValueError(f"silhouette needs at least 3 points, got {n}")
    unique = np.unique(labels)
    if unique.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")

    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    scores = np.zeros(n)
    for i in range(n):
        same = labels == labels[i]
        n_same = int(same.sum())
        if n_same <= 1:
            continue  # singleton: s_i = 0 by convention
        a = dist[i, same].sum() / (n_same - 1)  # excludes self (distance 0)
        b = min(dist[i, labels == other].mean() for other in unique if other != labels[i])
        denom = max(a, b)
        scores[i] = (b - a) / denom if denom > 0 else 0.0
    return float(scores.mean())


def select_k(
    points: np.ndarray, k_min: int = DEFAULT_K_MIN, k_max: int = DEFAULT_K_MAX, seed: int = 0
) -> tuple[int, ClusterAssignment]:
    """Sweep K over [k_min, k_max] and keep the K with the best silhouette.

    Exact silhouette ties go to the larger relative inertia drop within the
    sweep, then to the smaller K.  Too-small point sets clamp K instead of
    running the selection.
    """
    points = np.asarray(points, dtype=np.float64)
    if k_min > k_max:
        raise ValueError(f"k_min {k_min} exceeds k_max {k_max}")
    n = points.shape[0]
    if n < k_min:
        k = max(1, n)
        warnings.warn(
            f"only {n} points available; clamping cluster count to {k} and skipping K selection",
            stacklevel=2,
        )
        return k, kmeans(points, k, seed)

    k_hi = min(k_max, n)
    candidates: list[tuple[float, float, int, ClusterAssignment]] = []
    prev_inertia: float | None = None
    for k in range(k_min, k_hi + 1):
        asgn = kmeans(points, k, seed)
        if prev_inertia is None or prev_inertia <= 0:
            drop = 0.0
        else:
            drop = (prev_inertia - asgn.inertia) / prev_inertia
        prev_inertia = asgn.inertia
        candidates.append((asgn.silhouette, drop, k, asgn))
    best = max(candidates, key=lambda c: (c[0], c[1], -c[2]))
    return best[2], best[3]
