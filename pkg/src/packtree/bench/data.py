"""Deterministic input generators for the benchmarks.

Two distributions are used. Clustered data spreads n distinct keys over
[0, 9n/8): the range is cut into about n/1024 intervals of random width and
each interval is filled with short dense ascending runs, sampled without
replacement, until its share of the keys is reached. Micro blocks are short
delta sequences of a fixed bit width for exercising codec kernels in
isolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np


@dataclass(frozen=True)
class ClusterDataSpec:
    """n distinct keys in [0, 9n/8), grouped into dense clusters.

    mean_run is the average length of the dense ascending runs a cluster is
    filled with; larger values produce tighter, more compressible clusters.
    """

    n: int
    seed: int = 0
    mean_run: int = 16

    @property
    def range_max(self) -> int:
        return (9 * self.n) // 8


@dataclass(frozen=True)
class MicroSpec:
    """Blocks of block_len deltas, each uniform in [0, 2^b) with b <= 24.

    Zero deltas are lifted to 1 so decoded keys stay strictly increasing;
    the lift cannot raise the bit width. The cap b <= 24 keeps the sum of
    256 deltas inside 32 bits.
    """

    b: int
    seed: int = 0
    block_len: int = 256


def gen_clusterdata(spec: ClusterDataSpec) -> np.ndarray:
    """Ascending uint32 keys; deterministic under the spec's seed."""
    if spec.n < 1:
        raise ValueError("need at least one key")
    n, range_max = spec.n, spec.range_max
    rng = np.random.default_rng(spec.seed)
    bounds = _interval_bounds(rng, range_max, ceil(n / 1024))
    widths = np.diff(bounds)
    quotas = _quotas(n, widths)
    parts = [_fill_cluster(rng, int(lo), int(hi), int(q), spec.mean_run)
             for lo, hi, q in zip(bounds[:-1], bounds[1:], quotas) if q]
    keys = np.concatenate(parts)
    return keys.astype(np.uint32)


def _interval_bounds(rng: np.random.Generator, range_max: int,
                     n_clusters: int) -> np.ndarray:
    """0 and range_max plus n_clusters - 1 distinct interior cuts."""
    if n_clusters <= 1 or range_max <= n_clusters:
        return np.array([0, range_max], dtype=np.int64)
    need = n_clusters - 1
    cuts = np.unique(rng.integers(1, range_max, size=2 * need + 16))
    while cuts.size < need:
        more = rng.integers(1, range_max, size=2 * need)
        cuts = np.unique(np.concatenate([cuts, more]))
    picked = rng.choice(cuts.size, size=need, replace=False)
    cuts = np.sort(cuts[picked])
    return np.concatenate(([0], cuts, [range_max]))


def _quotas(n: int, widths: np.ndarray) -> np.ndarray:
    """Split n across intervals roughly in proportion to their widths."""
    exact = n * widths / widths.sum()
    quotas = np.minimum(np.floor(exact).astype(np.int64), widths)
    by_fraction = np.argsort(-(exact - np.floor(exact)))
    short = n - int(quotas.sum())
    while short:
        for idx in by_fraction:
            if short == 0:
                break
            if quotas[idx] < widths[idx]:
                quotas[idx] += 1
                short -= 1
    return quotas


def _ragged_arange(lengths: np.ndarray) -> np.ndarray:
    """Concatenation of arange(length) for each length."""
    starts = np.repeat(np.cumsum(np.concatenate(([0], lengths[:-1]))),
                       lengths)
    return np.arange(int(lengths.sum()), dtype=np.int64) - starts


def _fill_cluster(rng: np.random.Generator, lo: int, hi: int, quota: int,
                  mean_run: int) -> np.ndarray:
    """quota distinct values from [lo, hi), laid down as dense runs."""
    width = hi - lo
    if quota >= width:
        return np.arange(lo, hi, dtype=np.int64)
    seen = np.empty(0, dtype=np.int64)
    for _attempt in range(12):
        need = quota - seen.size
        if need == 0:
            break
        k = max(need // mean_run + 1, 8)
        starts = rng.integers(lo, hi, size=k)
        lengths = rng.geometric(1.0 / mean_run, size=k)
        drawn = np.repeat(starts, lengths) + _ragged_arange(lengths)
        drawn = drawn[drawn < hi]
        drawn = drawn[~np.isin(drawn, seen)]
        _vals, first = np.unique(drawn, return_index=True)
        drawn = drawn[np.sort(first)]  # novel values in draw order
        seen = np.concatenate([seen, drawn[:need]])
    if seen.size < quota:
        # dense cluster: take the shortfall from the untouched remainder
        rest = np.setdiff1d(np.arange(lo, hi, dtype=np.int64), seen)
        picked = rng.choice(rest.size, size=quota - seen.size, replace=False)
        seen = np.concatenate([seen, rest[picked]])
    seen.sort()
    return seen


def gen_micro_keys(spec: MicroSpec, count: int) -> np.ndarray:
    """count rows of ascending uint32 keys built from uniform deltas."""
    if not 0 <= spec.b <= 24:
        raise ValueError("delta bit width must be within [0, 24]")
    rng = np.random.default_rng(spec.seed)
    if spec.b == 0:
        deltas = np.ones((count, spec.block_len), dtype=np.uint32)
    else:
        deltas = rng.integers(0, 1 << spec.b, size=(count, spec.block_len),
                              dtype=np.uint32)
        np.maximum(deltas, 1, out=deltas)
    return np.cumsum(deltas, axis=1, dtype=np.uint32)
