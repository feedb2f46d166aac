"""Exact 2D t-SNE over the pooled candidate points.

The pool holds at most a few hundred (model, image) points per query, so the
quadratic exact algorithm is cheap and, unlike tree approximations, bit-for-bit
reproducible for a fixed seed.  Hyperparameters default to the classic
reference settings: perplexity 30, learning rate 200 with adaptive gains,
momentum 0.5 switching to 0.8 and a 12x early exaggeration for the first 250
iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS = 1e-12
EXAGGERATION_PHASE = 250
BANDWIDTH_SEARCH_STEPS = 50
BANDWIDTH_TOL = 1e-5
MIN_GAIN = 0.01


@dataclass
class TsneParams:
    perplexity: float = 30.0
    learning_rate: float = 200.0
    iterations: int = 1000
    early_exaggeration: float = 12.0
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 50:
            raise ValueError(f"iterations must be >= 50, got {self.iterations}")

    def effective_perplexity(self, n: int) -> float:
        # small pools cannot support large perplexities; clamp so the
        # bandwidth search stays solvable
        return min(self.perplexity, max(2.0, float((n - 1) // 3)))


@dataclass
class Projection2D:
    coords: np.ndarray  # (N, 2)
    kl_trace: list[float] = field(default_factory=list)


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _conditional_row(d2_row: np.ndarray, log_perp: float) -> np.ndarray:
    """Gaussian conditional affinities for one point.

    Binary search on the precision (beta) until the distribution's entropy
    matches log(perplexity).  Falls back to a uniform row when the search
    cannot match (e.g. all neighbors coincide).
    """
    beta = 1.0
    beta_min, beta_max = -np.inf, np.inf
    p = np.exp(-d2_row)
    for _ in range(BANDWIDTH_SEARCH_STEPS):
        p = np.exp(-d2_row * beta)
        sum_p = p.sum()
        if not np.isfinite(sum_p) or sum_p <= 0.0:
            break
        entropy = np.log(sum_p) + beta * float((d2_row * p).sum()) / sum_p
        diff = entropy - log_perp
        if abs(diff) < BANDWIDTH_TOL:
            break
        if diff > 0:
            beta_min = beta
            beta = beta * 2.0 if not np.isfinite(beta_max) else (beta + beta_max) / 2.0
        else:
            beta_max = beta
            beta = beta / 2.0 if not np.isfinite(beta_min) else (beta + beta_min) / 2.0
    sum_p = p.sum()
    if not np.isfinite(sum_p) or sum_p <= 0.0:
        return np.full_like(d2_row, 1.0 / d2_row.shape[0])
    return p / sum_p


def _joint_affinities(points: np.ndarray, perplexity: float) -> np.ndarray:
    n = points.shape[0]
    d2 = _pairwise_sq_dists(points)
    log_perp = float(np.log(perplexity))
    cond = np.zeros((n, n))
    idx = np.arange(n)
    for i in range(n):
        mask = idx != i
        cond[i, mask] = _conditional_row(d2[i, mask], log_perp)
    p = (cond + cond.T) / (2.0 * n)
    return np.maximum(p, EPS)


def tsne_2d(points: np.ndarray, params: TsneParams | None = None) -> Projection2D:
    """Project an (N, dim) matrix to 2D, deterministically for a fixed seed.

    The returned cloud is re-centered on the origin every iteration.  A KL
    divergence trace (against the non-exaggerated affinities) is kept for
    convergence diagnostics.
    """
    params = params or TsneParams()
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a non-empty 2D array")
    if not np.all(np.isfinite(points)):
        raise ValueError("points contain non-finite values")
    n = points.shape[0]
    if n == 1:
        return Projection2D(coords=np.zeros((1, 2)), kl_trace=[0.0])

    p = _joint_affinities(points, params.effective_perplexity(n))

    rng = np.random.default_rng(params.seed)
    y = rng.standard_normal((n, 2)) * 1e-4
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    kl_trace: list[float] = []

    for it in range(params.iterations):
        exaggerating = it < EXAGGERATION_PHASE
        p_eff = p * params.early_exaggeration if exaggerating else p
        momentum = params.momentum_start if it < EXAGGERATION_PHASE else params.momentum_final

        num = 1.0 / (1.0 + _pairwise_sq_dists(y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), EPS)

        pq = (p_eff - q) * num
        grad = 4.0 * (np.diag(pq.sum(axis=1)) - pq) @ y

        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        velocity = momentum * velocity - params.learning_rate * (gains * grad)
        y = y + velocity
        y = y - y.mean(axis=0)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"projection diverged at iteration {it}")

        kl_trace.append(float((p * np.log(p / q)).sum()))

    return Projection2D(coords=y, kl_trace=kl_trace)


def trustworthiness(high: np.ndarray, low: np.ndarray, k: int) -> float:
    """Neighborhood-preservation score in [0, 1].

    Penalizes points that enter a low-dimensional k-neighborhood without being
    in the corresponding high-dimensional one, weighted by how far down the
    true neighbor ranking they sit.
    """
    high = np.asarray(high, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    n = high.shape[0]
    if n < 4:
        raise ValueError(f"trustworthiness needs at least 4 points, got {n}")
    if low.shape[0] != n:
        raise ValueError("high and low point counts differ")
    if not 1 <= k < n / 2:
        raise ValueError(f"k must satisfy 1 <= k < n/2, got k={k}, n={n}")

    d_high = _pairwise_sq_dists(high)
    d_low = _pairwise_sq_dists(low)
    np.fill_diagonal(d_high, np.inf)
    np.fill_diagonal(d_low, np.inf)

    order_high = np.argsort(d_high, axis=1, kind="stable")
    # rank_high[i, j] = 1-based position of j among i's true neighbors
    rank_high = np.empty((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    rank_high[rows, order_high] = np.arange(1, n + 1)[None, :]

    low_neighbors = np.argsort(d_low, axis=1, kind="stable")[:, :k]
    penalty = 0
    for i in range(n):
        for j in low_neighbors[i]:
            r = int(rank_high[i, j])
            if r > k:
                penalty += r - k
    return 1.0 - (2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0))) * penalty
