"""Retrieval metrics, a batch evaluation harness, and a synthetic benchmark.

Real-corpus scores need fine-tuned checkpoints and human judgments, so the
harness ships a planted surrogate: a corpus with ground-truth groups where
each pseudo-checkpoint has its own blind spots and its own one-model intruder
items.  No single checkpoint retrieves all relevant items, their union does,
and intruders are only frequent in one checkpoint, which makes occurrence
frequency a genuine relevance signal.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from enclip.corpus import EmbeddingMatrix, ModelSet, write_store
from enclip.pipeline import PipelineConfig, run_pipeline
from enclip.search import cosine_topk

AP_DENOMINATORS = ("min", "total")


@dataclass
class QueryRecord:
    query_id: str
    text: str | None = None
    vectors: dict[str, np.ndarray] | None = None

    @property
    def category(self) -> str:
        return self.query_id.split(":", 1)[0] if ":" in self.query_id else "all"


@dataclass
class RelevanceJudgment:
    query_id: str
    relevant: set[str]


@dataclass
class QueryMetrics:
    prec_at_k: float
    avg_prec_at_k: float


@dataclass
class SystemScores:
    """Metrics for one ranking system (a single checkpoint or the ensemble)."""

    per_query: dict[str, QueryMetrics]
    map_score: float
    mean_prec_at_k: float


@dataclass
class EvalReport:
    per_query: dict[str, QueryMetrics]
    map_score: float
    config: dict
    baselines: dict[str, SystemScores] = field(default_factory=dict)

    def category_map(self, system: str = "ensemble") -> dict[str, float]:
        scores = self.per_query if system == "ensemble" else self.baselines[system].per_query
        by_cat: dict[str, list[float]] = {}
        for query_id, metrics in scores.items():
            cat = query_id.split(":", 1)[0] if ":" in query_id else "all"
            by_cat.setdefault(cat, []).append(metrics.avg_prec_at_k)
        return {cat: float(np.mean(vals)) for cat, vals in by_cat.items()}


def precision_at_k(ranked: Sequence[str], relevant: Iterable[str], k: int) -> float:
    """Fraction of the first k slots holding relevant items; short lists count misses."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    relevant = set(relevant)
    hits = sum(1 for item in ranked[:k] if item in relevant)
    return hits / k


def average_precision_at_k(
    ranked: Sequence[str], relevant: Iterable[str], k: int, denominator: str = "min"
) -> float:
    """Rank-weighted precision: mean of PREC@j over the relevant positions j <= k.

    The normalizer is min(|relevant|, k) by default so a perfect top-k list
    scores 1.0 even when more relevant items exist than slots; pass
    denominator="total" for the unbounded |relevant| convention.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    relevant = set(relevant)
    if not relevant:
        raise ValueError("average precision is undefined for an empty relevant set")
    if denominator not in AP_DENOMINATORS:
        raise ValueError(f"denominator must be one of {AP_DENOMINATORS}, got {denominator!r}")
    hits = 0
    total = 0.0
    for j, item in enumerate(ranked[:k], start=1):
        if item in relevant:
            hits += 1
            total += hits / j
    denom = min(len(relevant), k) if denominator == "min" else len(relevant)
    return total / denom


def mean_average_precision(per_query_ap: Sequence[float]) -> float:
    if len(per_query_ap) == 0:
        raise ValueError("mean average precision needs at least one query")
    return float(np.mean(per_query_ap))


def load_queries(path: str | Path) -> list[QueryRecord]:
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        if "query_id" not in rec:
            raise ValueError(f"{path} line {lineno}: query record missing query_id")
        vectors = None
        if rec.get("vectors"):
            vectors = {mid: np.asarray(vec, dtype=np.float64) for mid, vec in rec["vectors"].items()}
        records.append(QueryRecord(query_id=str(rec["query_id"]), text=rec.get("text"), vectors=vectors))
    return records


def load_qrels(path: str | Path) -> list[RelevanceJudgment]:
    judgments = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        if "query_id" not in rec or "relevant" not in rec:
            raise ValueError(f"{path} line {lineno}: qrel record needs query_id and relevant")
        relevant = {str(item) for item in rec["relevant"]}
        if not relevant:
            raise ValueError(f"{path} line {lineno}: empty relevant set for {rec['query_id']!r}")
        judgments.append(RelevanceJudgment(query_id=str(rec["query_id"]), relevant=relevant))
    return judgments


def _query_vectors_for(query: QueryRecord, model_set: ModelSet) -> list[np.ndarray]:
    if not query.vectors:
        raise ValueError(f"query {query.query_id!r} has no precomputed vectors")
    vectors = []
    for matrix in model_set:
        if matrix.model_id not in query.vectors:
            raise ValueError(f"query {query.query_id!r} is missing a vector for model {matrix.model_id!r}")
        vectors.append(query.vectors[matrix.model_id])
    return vectors


def run_eval(
    model_set: ModelSet,
    queries: Sequence[QueryRecord],
    qrels: Sequence[RelevanceJudgment],
    k: int = 10,
    config: PipelineConfig | None = None,
    denominator: str = "min",
    progress: Callable[[int, int], None] | None = None,
) -> EvalReport:
    """Score the full pipeline and every single-checkpoint baseline at cutoff k.

    Baselines rank by plain cosine similarity (no pooling or clustering), which
    is what each checkpoint would return on its own.
    """
    config = config or PipelineConfig()
    if not queries:
        raise ValueError("no queries")
    if config.n < k:
        raise ValueError(f"pipeline n ({config.n}) must be at least the metric cutoff k ({k})")
    by_query = {j.query_id: j for j in qrels}
    missing = [q.query_id for q in queries if q.query_id not in by_query]
    if missing:
        raise ValueError(f"missing relevance judgments for queries: {missing}")

    corpus_ids = set(model_set.models[0].item_ids)
    for judgment in qrels:
        unknown = judgment.relevant - corpus_ids
        if unknown:
            warnings.warn(
                f"qrels for {judgment.query_id!r} reference {len(unknown)} ids not in the corpus "
                f"(e.g. {sorted(unknown)[0]!r})",
                stacklevel=2,
            )

    ensemble: dict[str, QueryMetrics] = {}
    baselines: dict[str, dict[str, QueryMetrics]] = {m.model_id: {} for m in model_set}
    for done, query in enumerate(queries):
        relevant = by_query[query.query_id].relevant
        vectors = _query_vectors_for(query, model_set)
        result, _ = run_pipeline(model_set, vectors, config)
        ranked = [item.item_id for item in result.items]
        ensemble[query.query_id] = QueryMetrics(
            prec_at_k=precision_at_k(ranked, relevant, k),
            avg_prec_at_k=average_precision_at_k(ranked, relevant, k, denominator),
        )
        for n, matrix in enumerate(model_set):
            hits = cosine_topk(matrix, vectors[n], k, model_index=n)
            base_ranked = [h.item_id for h in hits]
            baselines[matrix.model_id][query.query_id] = QueryMetrics(
                prec_at_k=precision_at_k(base_ranked, relevant, k),
                avg_prec_at_k=average_precision_at_k(base_ranked, relevant, k, denominator),
            )
        if progress is not None:
            progress(done + 1, len(queries))

    def finish(per_query: dict[str, QueryMetrics]) -> SystemScores:
        return SystemScores(
            per_query=per_query,
            map_score=mean_average_precision([m.avg_prec_at_k for m in per_query.values()]),
            mean_prec_at_k=float(np.mean([m.prec_at_k for m in per_query.values()])),
        )

    return EvalReport(
        per_query=ensemble,
        map_score=mean_average_precision([m.avg_prec_at_k for m in ensemble.values()]),
        config={
            "k": k,
            "n": config.n,
            "top_k_per_model": config.top_k_per_model,
            "k_min": config.k_min,
            "k_max": config.k_max,
            "seed": config.seed,
            "comparator": config.comparator,
            "denominator": denominator,
        },
        baselines={mid: finish(per_query) for mid, per_query in baselines.items()},
    )


def format_report_table(report: EvalReport, model_ids: Sequence[str]) -> str:
    """Plain-text grid: one row per query category, one column per system."""
    systems = list(model_ids) + ["ensemble"]
    per_system = {mid: report.category_map(mid) for mid in model_ids}
    per_system["ensemble"] = report.category_map("ensemble")
    categories = sorted(per_system["ensemble"])

    header = ["category"] + systems
    rows = [header]
    for cat in categories:
        rows.append([cat] + [f"{per_system[s].get(cat, float('nan')):.3f}" for s in systems])
    rows.append(["ALL"] + [
        f"{report.baselines[s].map_score if s != 'ensemble' else report.map_score:.3f}" for s in systems
    ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * widths[j] for j in range(len(header))))
    title = f"mAP for average precision @{report.config['k']}"
    return title + "\n" + "\n".join(lines)


@dataclass
class FixtureSpec:
    """Knobs for the planted synthetic benchmark."""

    items: int = 2000
    groups: int = 20
    models: int = 5
    dim: int = 64
    queries_per_group: int = 2
    relevant_fraction: float = 0.4
    attr_scale: float = 0.6
    shared_noise: float = 0.25
    model_noise: float = 0.1
    blind_per_model: int = 4
    intruders_per_model: int = 3
    intruder_noise: float = 0.05
    query_noise: float = 0.02

    def __post_init__(self) -> None:
        if self.items < self.groups:
            raise ValueError("need at least one item per group")
        if self.models < 1 or self.groups < 1 or self.dim < 2:
            raise ValueError("models, groups and dim must be positive (dim >= 2)")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _epoch_schedule(z: int) -> list[int]:
    base = [10, 30, 50, 80, 100]
    while len(base) < z:
        base.append(base[-1] + 20)
    return base[:z]


def synth_fixture(
    seed: int, spec: FixtureSpec | None = None
) -> tuple[list[EmbeddingMatrix], list[QueryRecord], list[RelevanceJudgment]]:
    """Generate z pseudo-checkpoint stores plus group-targeted queries and qrels.

    Each group splits into attribute-positive items (the relevant set) and
    same-group near misses.  Positives sit near a per-group target direction;
    near misses sit on the opposite side of the attribute axis.  Per model,
    a disjoint slice of core positives is corrupted (blind spots) and a
    disjoint slice of near misses is planted right at the target (one-model
    intruders).  Later models never dominate: every model gets the same noise
    budget, so frequency, not epoch weight alone, separates signal from noise.
    """
    spec = spec or FixtureSpec()
    rng = np.random.default_rng(seed)
    z, dim, n_groups = spec.models, spec.dim, spec.groups

    group_sizes = [spec.items // n_groups] * n_groups
    for g in range(spec.items % n_groups):
        group_sizes[g] += 1

    centers = rng.standard_normal((n_groups, dim))
    attrs = rng.standard_normal((n_groups, dim))

    item_ids: list[str] = []
    item_group: list[int] = []
    positives_by_group: list[list[int]] = []
    base_vectors = np.zeros((spec.items, dim))

    idx = 0
    targets = np.zeros((n_groups, dim))
    for g in range(n_groups):
        center = _unit(centers[g])
        attr = _unit(attrs[g])
        targets[g] = _unit(center + spec.attr_scale * attr)
        anti_target = _unit(center - spec.attr_scale * attr)
        size = group_sizes[g]
        n_pos = max(1, round(size * spec.relevant_fraction))
        positives: list[int] = []
        for j in range(size):
            item_ids.append(f"item{idx:05d}")
            item_group.append(g)
            offset = rng.standard_normal(dim) * spec.shared_noise
            if j < n_pos:
                base_vectors[idx] = targets[g] + offset
                positives.append(idx)
            else:
                base_vectors[idx] = anti_target + offset
            idx += 1
        positives_by_group.append(positives)

    # per-model embeddings: shared structure plus model noise
    model_vectors = np.zeros((z, spec.items, dim))
    for n in range(z):
        noisy = base_vectors + rng.standard_normal((spec.items, dim)) * spec.model_noise
        model_vectors[n] = noisy / np.linalg.norm(noisy, axis=1, keepdims=True)

    for g in range(n_groups):
        positives = positives_by_group[g]
        size = group_sizes[g]
        n_pos = len(positives)
        # blind spots: corrupt core positives (nearest the target) in one model each
        core = sorted(positives, key=lambda i: float(np.linalg.norm(base_vectors[i] - targets[g])))
        blind_pool = core[: z * spec.blind_per_model]
        for n in range(z):
            for i in blind_pool[n * spec.blind_per_model : (n + 1) * spec.blind_per_model]:
                model_vectors[n, i] = _unit(rng.standard_normal(dim))
        # intruders: near misses planted at the target in exactly one model
        near_misses = [i for i in range(sum(group_sizes[:g]), sum(group_sizes[: g + 1])) if i not in set(positives)]
        intruder_pool = near_misses[: z * spec.intruders_per_model]
        for n in range(z):
            for i in intruder_pool[n * spec.intruders_per_model : (n + 1) * spec.intruders_per_model]:
                model_vectors[n, i] = _unit(targets[g] + rng.standard_normal(dim) * spec.intruder_noise)

    epochs = _epoch_schedule(z)
    matrices = [
        EmbeddingMatrix(
            model_id=f"m{epochs[n]:03d}",
            epoch=epochs[n],
            dim=dim,
            item_ids=list(item_ids),
            vectors=model_vectors[n].astype(np.float32),
            normalized=True,
        )
        for n in range(z)
    ]

    queries: list[QueryRecord] = []
    qrels: list[RelevanceJudgment] = []
    for g in range(n_groups):
        relevant = {item_ids[i] for i in positives_by_group[g]}
        for q in range(spec.queries_per_group):
            vec = _unit(targets[g] + rng.standard_normal(dim) * spec.query_noise)
            queries.append(
                QueryRecord(
                    query_id=f"g{g:02d}:{q}",
                    text=f"group {g} attribute query {q}",
                    vectors={m.model_id: vec.copy() for m in matrices},
                )
            )
            qrels.append(RelevanceJudgment(query_id=f"g{g:02d}:{q}", relevant=set(relevant)))
    return matrices, queries, qrels


def write_fixture(
    out_dir: str | Path,
    matrices: Sequence[EmbeddingMatrix],
    queries: Sequence[QueryRecord],
    qrels: Sequence[RelevanceJudgment],
) -> dict[str, list[str] | str]:
    """Write fixture stores plus queries.jsonl / qrels.jsonl under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store_paths = []
    for matrix in matrices:
        path = out / f"store_{matrix.model_id}.encb"
        write_store(matrix, path)
        store_paths.append(str(path))
    queries_path = out / "queries.jsonl"
    with queries_path.open("w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(
                json.dumps(
                    {
                        "query_id": q.query_id,
                        "text": q.text,
                        "vectors": {mid: [float(x) for x in vec] for mid, vec in (q.vectors or {}).items()},
                    }
                )
                + "\n"
            )
    qrels_path = out / "qrels.jsonl"
    with qrels_path.open("w", encoding="utf-8") as fh:
        for j in qrels:
            fh.write(json.dumps({"query_id": j.query_id, "relevant": sorted(j.relevant)}) + "\n")
    return {"stores": store_paths, "queries": str(queries_path), "qrels": str(qrels_path)}
