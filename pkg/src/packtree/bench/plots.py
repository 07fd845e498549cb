"""Figure rendering for benchmark reports.

Figures land next to the CSV they summarize: a throughput chart (median
ops/sec per codec and benchmark, log scale) and a size chart (bytes per
key). Rendering is headless.
"""

from __future__ import annotations

import os
from typing import List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .harness import BenchReport  # noqa: E402


def _ordered_unique(values):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def _grouped_bars(ax, reports: Sequence[BenchReport], value) -> None:
    benchmarks = _ordered_unique(r.benchmark for r in reports)
    codecs = _ordered_unique(r.codec for r in reports)
    by_key = {(r.benchmark, r.codec): r for r in reports}
    width = 0.8 / len(codecs)
    for ci, codec in enumerate(codecs):
        xs, ys = [], []
        for bi, bench in enumerate(benchmarks):
            rep = by_key.get((bench, codec))
            if rep is not None:
                xs.append(bi + ci * width)
                ys.append(value(rep))
        ax.bar(xs, ys, width=width, label=codec)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(benchmarks))])
    ax.set_xticklabels(benchmarks, rotation=30, ha="right", fontsize=8)
    ax.legend(fontsize=8)


def render_figures(reports: Sequence[BenchReport], csv_path: str
                   ) -> List[str]:
    """Write throughput and size figures next to csv_path."""
    stem = os.path.splitext(csv_path)[0]
    n_benchmarks = len(_ordered_unique(r.benchmark for r in reports))
    figsize = (max(6.0, 1.3 * n_benchmarks), 4.0)
    written = []

    fig, ax = plt.subplots(figsize=figsize)
    _grouped_bars(ax, reports, lambda r: r.median_ops_per_sec)
    ax.set_yscale("log")
    ax.set_ylabel("median ops/sec")
    fig.tight_layout()
    path = f"{stem}-throughput.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=figsize)
    _grouped_bars(ax, reports, lambda r: r.bytes_per_key)
    ax.set_ylabel("bytes per key")
    fig.tight_layout()
    path = f"{stem}-size.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
