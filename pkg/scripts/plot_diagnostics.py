"""Render the joint 2-D projection for one query as a scatter plot.

Runs a query against a store directory, then draws every retrieved point in
the shared projection: color = cluster, marker = source model, stars = the
head items that seeded each selection batch.

Usage:
    python3 scripts/plot_diagnostics.py --stores fixture_dir \
        --qvec-file query.json --out diag.png
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from enclip.corpus import open_model_set
from enclip.dimred import TsneParams
from enclip.pipeline import PipelineConfig, run_pipeline
from enclip.service import resolve_store_paths

MARKERS = "o^svDP*Xd"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--stores", required=True)
    parser.add_argument("--qvec-file", required=True, help="JSON with per-model query vectors")
    parser.add_argument("--n", type=int, default=10)
    parser.add_argument("--topk", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="diagnostics.png")
    args = parser.parse_args()

    model_set = open_model_set(resolve_store_paths(args.stores))
    doc = json.loads(Path(args.qvec_file).read_text(encoding="utf-8"))
    vec_map = doc.get("vectors", doc)
    vectors = [np.asarray(vec_map[m.model_id], dtype=np.float64) for m in model_set]

    config = PipelineConfig(
        top_k_per_model=args.topk, n=args.n, seed=args.seed, tsne=TsneParams(seed=args.seed)
    )
    result, pool = run_pipeline(model_set, vectors, config)
    diag = result.diagnostics
    assert diag is not None

    fig, ax = plt.subplots(figsize=(8, 7))
    cmap = plt.get_cmap("tab10")
    coords = diag.coords
    for i, (x, y) in enumerate(coords):
        model_idx = diag.point_models[i]
        label = diag.labels[i]
        ax.scatter(
            x, y,
            c=[cmap(label % 10)],
            marker=MARKERS[model_idx % len(MARKERS)],
            s=45, alpha=0.8, linewidths=0.4, edgecolors="black",
        )
    head_set = set(result.head_sequence[: len(result.items)])
    for i, (x, y) in enumerate(coords):
        if diag.point_items[i] in head_set:
            ax.scatter(x, y, marker="*", s=220, c="none", edgecolors="red", linewidths=1.2)

    handles = [
        plt.Line2D([], [], color="gray", marker=MARKERS[m % len(MARKERS)], linestyle="",
                   label=model_set.models[m].model_id)
        for m in range(model_set.z)
    ]
    handles.append(plt.Line2D([], [], color="red", marker="*", linestyle="",
                              markerfacecolor="none", label="head item"))
    ax.legend(handles=handles, loc="best", fontsize=8)
    ax.set_title(
        f"{len(coords)} points, {len(pool.entries)} items, "
        f"k={diag.chosen_k} clusters (silhouette {diag.silhouette:.3f})"
    )
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}: {len(coords)} points, chosen_k={diag.chosen_k}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
