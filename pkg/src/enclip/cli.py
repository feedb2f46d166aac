"""Command line front end: ingest stores, serve HTTP, query, evaluate, synth fixtures."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from enclip.corpus import StoreError, ingest_text, open_model_set, write_store
from enclip.dimred import TsneParams
from enclip.evalkit import (
    FixtureSpec,
    format_report_table,
    load_qrels,
    load_queries,
    run_eval,
    synth_fixture,
    write_fixture,
)
from enclip.pipeline import PipelineConfig, run_pipeline
from enclip.ranker import COMPARATORS, DEFAULT_COMPARATOR
from enclip.search import DEFAULT_TOP_K
from enclip.service import (
    DEFAULT_PORT,
    ENV_ENCODER_URL,
    ENV_PORT,
    EncoderError,
    build_app,
    encode_text,
    resolve_store_paths,
    result_document,
)


def _cmd_ingest(args: argparse.Namespace) -> int:
    matrix = ingest_text(args.input, model_id=args.model_id, epoch=args.epoch)
    write_store(matrix, args.out)
    print(
        f"wrote {args.out}: model {matrix.model_id} epoch {matrix.epoch}, "
        f"{len(matrix)} items, dim {matrix.dim}"
    )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    app = build_app(stores=args.stores, encoder_url=args.encoder_url, images_dir=args.images_dir)
    port = args.port if args.port is not None else int(os.environ.get(ENV_PORT, DEFAULT_PORT))
    uvicorn.run(app, host=args.host, port=port)
    return 0


def _load_query_vectors(path: str | Path) -> dict[str, np.ndarray]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    vec_map = doc.get("vectors", doc)
    if not isinstance(vec_map, dict) or not vec_map:
        raise ValueError(f"{path}: expected a model_id -> vector map (optionally under 'vectors')")
    return {str(mid): np.asarray(vec, dtype=np.float64) for mid, vec in vec_map.items()}


def _cmd_query(args: argparse.Namespace) -> int:
    model_set = open_model_set(resolve_store_paths(args.stores))
    if args.text is not None:
        encoder_url = args.encoder_url or os.environ.get(ENV_ENCODER_URL)
        if not encoder_url:
            raise ValueError(f"--text needs an encoder: pass --encoder-url or set {ENV_ENCODER_URL}")
        vectors = encode_text(encoder_url, [m.model_id for m in model_set], args.text, model_set.dim)
    else:
        vec_map = _load_query_vectors(args.qvec_file)
        known = {m.model_id for m in model_set}
        unknown = sorted(set(vec_map) - known)
        if unknown:
            raise ValueError(f"unknown model ids in {args.qvec_file}: {unknown}")
        missing = sorted(known - set(vec_map))
        if missing:
            raise ValueError(f"{args.qvec_file} is missing vectors for models: {missing}")
        vectors = [vec_map[m.model_id] for m in model_set]

    config = PipelineConfig(
        top_k_per_model=args.topk,
        n=args.n,
        seed=args.seed,
        comparator=args.comparator,
        tsne=TsneParams(seed=args.seed),
    )
    result, pool = run_pipeline(model_set, vectors, config)
    if args.json:
        doc = result_document(result, pool, model_set, args.n, include_diagnostics=True)
        print(json.dumps(doc, indent=2))
    else:
        print(f"{'rank':<5} {'item_id':<24} {'frequency':<9} weighted_score")
        for rank, item in enumerate(result.items, start=1):
            print(f"{rank:<5} {item.item_id:<24} {item.frequency:<9} {item.weighted_score:.4f}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    model_set = open_model_set(resolve_store_paths(args.stores))
    queries = load_queries(args.queries)
    qrels = load_qrels(args.qrels)
    config = PipelineConfig(
        top_k_per_model=args.topk,
        n=max(args.n, args.k),
        seed=args.seed,
        comparator=args.comparator,
        tsne=TsneParams(seed=args.seed),
    )
    report = run_eval(model_set, queries, qrels, k=args.k, config=config, denominator=args.denominator)
    model_ids = [m.model_id for m in model_set]
    if args.json:
        from enclip.service import report_document

        print(json.dumps(report_document(report, model_ids), indent=2))
    else:
        print(format_report_table(report, model_ids))
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = FixtureSpec(items=args.items, groups=args.groups, models=args.models, dim=args.dim)
    matrices, queries, qrels = synth_fixture(args.seed, spec)
    manifest = write_fixture(args.out, matrices, queries, qrels)
    print(json.dumps(manifest, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="enclip", description="multi-checkpoint ensemble search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a text embedding dump into a binary store")
    p.add_argument("--input", required=True, help="line-delimited JSON embedding dump")
    p.add_argument("--model-id", default=None, help="override the model id from the header")
    p.add_argument("--epoch", type=int, default=None, help="override the epoch from the header")
    p.add_argument("--out", required=True, help="output .encb store path")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--stores", default=None, help="directory of .encb stores (or path-separated files)")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--encoder-url", default=None, help="text encoder sidecar endpoint")
    p.add_argument("--images-dir", default=None, help="directory served under /images")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("query", help="run one query against local stores")
    p.add_argument("--stores", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text", default=None, help="query text (needs an encoder)")
    src.add_argument("--qvec-file", default=None, help="JSON file with per-model query vectors")
    p.add_argument("--encoder-url", default=None)
    p.add_argument("--n", type=int, default=10, help="results to return")
    p.add_argument("--topk", type=int, default=DEFAULT_TOP_K, help="per-model retrieval depth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--comparator", choices=COMPARATORS, default=DEFAULT_COMPARATOR)
    p.add_argument("--json", action="store_true", help="structured output instead of a table")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("eval", help="score the pipeline against relevance judgments")
    p.add_argument("--stores", required=True)
    p.add_argument("--queries", required=True, help="line-delimited query records")
    p.add_argument("--qrels", required=True, help="line-delimited relevance judgments")
    p.add_argument("--k", type=int, default=10, help="metric cutoff")
    p.add_argument("--n", type=int, default=10, help="results per query (raised to k if smaller)")
    p.add_argument("--topk", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--denominator", choices=("min", "total"), default="min")
    p.add_argument("--comparator", choices=COMPARATORS, default=DEFAULT_COMPARATOR)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate the planted synthetic benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--items", type=int, default=2000)
    p.add_argument("--groups", type=int, default=20)
    p.add_argument("--models", type=int, default=5)
    p.add_argument("--dim", type=int, default=64)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, StoreError, EncoderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
