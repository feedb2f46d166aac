"""HTTP front end: search, evaluation jobs, model info, and image bytes.

The store set is loaded once and never mutated, so every endpoint is safe
under concurrent requests.  Live text queries need an external encoder
sidecar (one HTTP call per checkpoint, issued concurrently); evaluation
works fully offline from precomputed query vectors.
"""

from __future__ import annotations

import mimetypes
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel

from enclip.cluster import DEFAULT_K_MAX, DEFAULT_K_MIN
from enclip.corpus import ModelSet, open_model_set
from enclip.dimred import TsneParams
from enclip.evalkit import EvalReport, format_report_table, load_qrels, load_queries, run_eval
from enclip.pipeline import PipelineConfig, run_pipeline
from enclip.ranker import COMPARATORS, DEFAULT_COMPARATOR, CandidatePool, RankedResult
from enclip.search import DEFAULT_TOP_K

ENV_STORES = "ENCLIP_STORES"
ENV_ENCODER_URL = "ENCLIP_ENCODER_URL"
ENV_IMAGES_DIR = "ENCLIP_IMAGES_DIR"
ENV_PORT = "ENCLIP_PORT"
DEFAULT_PORT = 8080

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".webp", ".gif")
ENCODER_TIMEOUT = 30.0


class EncoderError(RuntimeError):
    """The encoder sidecar failed or returned an unusable vector."""


class SearchRequest(BaseModel):
    text: str | None = None
    query_vectors: dict[str, list[float]] | None = None
    top_k_per_model: int = DEFAULT_TOP_K
    n: int = 10
    k_min: int = DEFAULT_K_MIN
    k_max: int = DEFAULT_K_MAX
    seed: int = 0
    comparator: str = DEFAULT_COMPARATOR
    include_diagnostics: bool = False


class EvalRequest(BaseModel):
    queries: str
    qrels: str
    k: int = 10
    denominator: str = "min"
    n: int = 10
    top_k_per_model: int = DEFAULT_TOP_K
    k_min: int = DEFAULT_K_MIN
    k_max: int = DEFAULT_K_MAX
    seed: int = 0
    comparator: str = DEFAULT_COMPARATOR


@dataclass
class EvalJob:
    job_id: str
    total: int = 0
    completed: int = 0
    status: str = "running"  # running | done | error
    report: dict | None = None
    error: str | None = None


def resolve_store_paths(spec: str) -> list[Path]:
    """Expand a stores argument: directory of .encb files, or path-separated files."""
    paths: list[Path] = []
    for part in spec.split(os.pathsep):
        if not part:
            continue
        p = Path(part)
        if p.is_dir():
            found = sorted(p.glob("*.encb"))
            if not found:
                raise FileNotFoundError(f"no .encb stores in directory {p}")
            paths.extend(found)
        elif p.is_file():
            paths.append(p)
        else:
            raise FileNotFoundError(f"store path {p} does not exist")
    if not paths:
        raise FileNotFoundError(f"no stores resolved from {spec!r}")
    return paths


def encode_text(encoder_url: str, model_ids: Sequence[str], text: str, dim: int) -> list[np.ndarray]:
    """Fetch one query vector per checkpoint from the encoder sidecar, concurrently."""

    def one(model_id: str) -> np.ndarray:
        try:
            resp = httpx.post(
                encoder_url,
                json={"model_id": model_id, "modality": "text", "payload": text},
                timeout=ENCODER_TIMEOUT,
            )
            resp.raise_for_status()
            body = resp.json()
        except httpx.HTTPError as exc:
            raise EncoderError(f"encoder call for model {model_id!r} failed: {exc}") from exc
        except ValueError as exc:
            raise EncoderError(f"encoder returned non-JSON for model {model_id!r}: {exc}") from exc
        if "vec" not in body:
            raise EncoderError(f"encoder response for model {model_id!r} lacks 'vec'")
        vec = np.asarray(body["vec"], dtype=np.float64)
        if vec.shape != (dim,):
            raise EncoderError(
                f"encoder vector for model {model_id!r} has shape {vec.shape}, expected ({dim},)"
            )
        return vec

    with ThreadPoolExecutor(max_workers=max(1, len(model_ids))) as pool:
        return list(pool.map(one, model_ids))


def _pipeline_config(req: SearchRequest | EvalRequest) -> PipelineConfig:
    return PipelineConfig(
        top_k_per_model=req.top_k_per_model,
        n=req.n,
        k_min=req.k_min,
        k_max=req.k_max,
        seed=req.seed,
        comparator=req.comparator,
        tsne=TsneParams(seed=req.seed),
    )


def result_document(
    result: RankedResult, pool: CandidatePool, model_set: ModelSet, n: int, include_diagnostics: bool
) -> dict:
    z = model_set.z
    items = []
    for rank, item in enumerate(result.items, start=1):
        entry = pool.entries[item.item_id]
        sims: list[float | None] = [None] * z
        for point in entry.points:
            sims[point.model_index] = float(point.similarity)
        items.append(
            {
                "rank": rank,
                "item_id": item.item_id,
                "frequency": item.frequency,
                "weighted_score": float(item.weighted_score),
                "best_similarity": float(item.best_similarity),
                "occurrence": list(entry.occurrence),
                "similarities": sims,
            }
        )
    doc = {
        "n": n,
        "returned": len(items),
        "truncated": len(items) < n,
        "pool_size": len(pool),
        "models": [{"model_id": m.model_id, "epoch": m.epoch} for m in model_set],
        "items": items,
        "head_sequence": list(result.head_sequence),
    }
    diag = result.diagnostics
    if include_diagnostics and diag is not None:
        doc["diagnostics"] = {
            "coords": [[float(x), float(y)] for x, y in diag.coords],
            "labels": [int(label) for label in diag.labels],
            "chosen_k": int(diag.chosen_k),
            "silhouette": float(diag.silhouette),
            "head_cluster_ids": [[int(c) for c in ids] for ids in diag.head_cluster_ids],
            "point_items": list(diag.point_items),
            "point_models": [int(m) for m in diag.point_models],
            "point_similarities": [float(s) for s in diag.point_similarities],
        }
    return doc


def report_document(report: EvalReport, model_ids: Sequence[str]) -> dict:
    def per_query_doc(per_query: dict) -> dict:
        return {
            qid: {"prec_at_k": m.prec_at_k, "avg_prec_at_k": m.avg_prec_at_k}
            for qid, m in per_query.items()
        }

    return {
        "config": report.config,
        "map": report.map_score,
        "per_query": per_query_doc(report.per_query),
        "baselines": {
            mid: {
                "map": scores.map_score,
                "mean_prec_at_k": scores.mean_prec_at_k,
                "per_query": per_query_doc(scores.per_query),
            }
            for mid, scores in report.baselines.items()
        },
        "table": format_report_table(report, model_ids),
    }


def create_app(
    model_set: ModelSet,
    encoder_url: str | None = None,
    images_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="enclip")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    images_path = Path(images_dir).resolve() if images_dir is not None else None
    jobs: dict[str, EvalJob] = {}
    jobs_lock = threading.Lock()

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "z": model_set.z,
            "dim": model_set.dim,
            "corpus_size": model_set.corpus_size,
        }

    @app.get("/models")
    def models() -> dict:
        return {
            "models": [
                {"model_id": m.model_id, "epoch": m.epoch, "dim": m.dim, "count": len(m)}
                for m in model_set
            ]
        }

    def resolve_query_vectors(req: SearchRequest) -> list[np.ndarray]:
        if (req.text is None) == (req.query_vectors is None):
            raise HTTPException(400, "provide exactly one of 'text' or 'query_vectors'")
        if req.text is not None:
            if encoder_url is None:
                raise HTTPException(
                    400, "text queries need an encoder; start the service with --encoder-url"
                )
            try:
                return encode_text(encoder_url, [m.model_id for m in model_set], req.text, model_set.dim)
            except EncoderError as exc:
                raise HTTPException(502, str(exc)) from exc
        assert req.query_vectors is not None
        known = {m.model_id for m in model_set}
        unknown = sorted(set(req.query_vectors) - known)
        if unknown:
            raise HTTPException(400, f"unknown model ids in query_vectors: {unknown}")
        missing = sorted(known - set(req.query_vectors))
        if missing:
            raise HTTPException(400, f"query_vectors missing models: {missing}")
        return [np.asarray(req.query_vectors[m.model_id], dtype=np.float64) for m in model_set]

    @app.post("/search")
    def search(req: SearchRequest) -> dict:
        if req.n < 1:
            raise HTTPException(400, f"n must be >= 1, got {req.n}")
        if req.comparator not in COMPARATORS:
            raise HTTPException(400, f"comparator must be one of {COMPARATORS}, got {req.comparator!r}")
        vectors = resolve_query_vectors(req)
        try:
            result, pool = run_pipeline(model_set, vectors, _pipeline_config(req))
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        return result_document(result, pool, model_set, req.n, req.include_diagnostics)

    def run_job(job: EvalJob, req: EvalRequest) -> None:
        def on_progress(done: int, total: int) -> None:
            with jobs_lock:
                job.completed, job.total = done, total

        try:
            queries = load_queries(req.queries)
            qrels = load_qrels(req.qrels)
            with jobs_lock:
                job.total = len(queries)
            report = run_eval(
                model_set,
                queries,
                qrels,
                k=req.k,
                config=_pipeline_config(req),
                denominator=req.denominator,
                progress=on_progress,
            )
            with jobs_lock:
                job.report = report_document(report, [m.model_id for m in model_set])
                job.status = "done"
        except Exception as exc:
            with jobs_lock:
                job.error = str(exc)
                job.status = "error"

    @app.post("/eval")
    def start_eval(req: EvalRequest) -> dict:
        for label, path in (("queries", req.queries), ("qrels", req.qrels)):
            if not Path(path).is_file():
                raise HTTPException(400, f"{label} file {path!r} not found on the server")
        job = EvalJob(job_id=uuid.uuid4().hex)
        with jobs_lock:
            jobs[job.job_id] = job
        threading.Thread(target=run_job, args=(job, req), daemon=True).start()
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/eval/{job_id}")
    def eval_status(job_id: str) -> dict:
        with jobs_lock:
            job = jobs.get(job_id)
            if job is None:
                raise HTTPException(404, f"no eval job {job_id!r}")
            doc = {
                "job_id": job.job_id,
                "status": job.status,
                "completed": job.completed,
                "total": job.total,
            }
            if job.report is not None:
                doc["report"] = job.report
            if job.error is not None:
                doc["error"] = job.error
        return doc

    @app.get("/images/{item_id}")
    def image(item_id: str) -> FileResponse:
        if images_path is None:
            raise HTTPException(404, "no images directory configured")
        if "/" in item_id or "\\" in item_id or ".." in item_id:
            raise HTTPException(400, f"invalid item id {item_id!r}")
        names = [item_id] if Path(item_id).suffix else [item_id + ext for ext in IMAGE_EXTENSIONS]
        for name in names:
            candidate = (images_path / name).resolve()
            if not candidate.is_relative_to(images_path):
                raise HTTPException(400, f"invalid item id {item_id!r}")
            if candidate.is_file():
                media = mimetypes.guess_type(candidate.name)[0] or "application/octet-stream"
                return FileResponse(candidate, media_type=media)
        raise HTTPException(404, f"no image for item {item_id!r}")

    return app


def build_app(
    stores: str | None = None,
    encoder_url: str | None = None,
    images_dir: str | None = None,
) -> FastAPI:
    """Assemble the app from arguments, falling back to ENCLIP_* env vars."""
    stores = stores or os.environ.get(ENV_STORES)
    if not stores:
        raise ValueError(f"no stores given: pass --stores or set {ENV_STORES}")
    encoder_url = encoder_url or os.environ.get(ENV_ENCODER_URL)
    images_dir = images_dir or os.environ.get(ENV_IMAGES_DIR)
    model_set = open_model_set(resolve_store_paths(stores))
    return create_app(model_set, encoder_url=encoder_url, images_dir=images_dir)
