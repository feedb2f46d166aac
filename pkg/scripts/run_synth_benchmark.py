"""Score the ensemble against its single-model baselines on the planted benchmark.

Generates the synthetic fixture in memory, evaluates every comparator, and
prints one table per comparator plus a comparator summary. Useful as a quick
regression check that the ensemble still beats each individual checkpoint.

Usage:
    python3 scripts/run_synth_benchmark.py --seed 0 --k 10
"""

from __future__ import annotations

import argparse
import time

from enclip.corpus import ModelSet
from enclip.dimred import TsneParams
from enclip.evalkit import FixtureSpec, format_report_table, run_eval, synth_fixture
from enclip.pipeline import PipelineConfig
from enclip.ranker import COMPARATORS


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--items", type=int, default=2000)
    parser.add_argument("--groups", type=int, default=20)
    parser.add_argument("--models", type=int, default=5)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--k", type=int, default=10, help="metric cutoff")
    parser.add_argument("--topk", type=int, default=20, help="per-model retrieval depth")
    args = parser.parse_args()

    spec = FixtureSpec(items=args.items, groups=args.groups, models=args.models, dim=args.dim)
    print(f"generating fixture: {spec.items} items, {spec.groups} groups, "
          f"{spec.models} models, dim {spec.dim}, seed {args.seed}")
    mats, queries, qrels = synth_fixture(args.seed, spec)
    model_set = ModelSet(models=mats)
    model_ids = [m.model_id for m in model_set]

    summary: dict[str, float] = {}
    for comparator in sorted(COMPARATORS):
        config = PipelineConfig(
            top_k_per_model=args.topk,
            n=args.k,
            seed=args.seed,
            comparator=comparator,
            tsne=TsneParams(seed=args.seed),
        )
        start = time.perf_counter()
        report = run_eval(
            model_set,
            queries,
            qrels,
            k=args.k,
            config=config,
            progress=lambda done, total: print(f"\r  {comparator}: {done}/{total}", end=""),
        )
        print(f"  ({time.perf_counter() - start:.1f}s)")
        print(format_report_table(report, model_ids))
        print()
        summary[comparator] = report.map_score
        best_single = max(s.map_score for s in report.baselines.values())
        gain = report.map_score - best_single
        print(f"ensemble {report.map_score:.4f} vs best single {best_single:.4f} "
              f"({'+' if gain >= 0 else ''}{gain:.4f})")
        print()

    print("comparator summary (mAP@{}):".format(args.k))
    for comparator, score in sorted(summary.items(), key=lambda kv: -kv[1]):
        print(f"  {comparator:<14} {score:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
