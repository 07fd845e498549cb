"""Timing loops, correctness passes, and CSV output for the benchmarks.

Every benchmark verifies its results against generator-side ground truth
before any timing starts; a mismatch raises CorrectnessError rather than
producing numbers from a broken build. Wall time comes from a monotonic
clock and each configuration is run several times with the median reported
alongside the raw runs.
"""

from __future__ import annotations

import csv
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import median
from typing import List, Optional, Sequence, TextIO

import numpy as np

from ..btree import Database
from ..codecs import CODEC_NAMES, CompressedBlock, get_codec
from ..keylist import DESC_BYTES
from ..store import DEFAULT_PAGE_SIZE
from .data import ClusterDataSpec, MicroSpec, gen_clusterdata, gen_micro_keys

MICRO_OPS = ("decompress", "select", "find", "insert-from-random")
DB_WORKLOADS = ("insert", "lookup", "cursor", "sum", "avg-filter")
CSV_COLUMNS = ("benchmark", "codec", "n", "block_size", "run", "wall_ns",
               "ops_per_sec", "bytes_per_key")


class CorrectnessError(Exception):
    """A benchmark's results disagree with the generator's ground truth."""


@dataclass
class BenchReport:
    benchmark: str
    codec: str
    n: int
    block_size: int
    wall_ns: List[int]
    ops_per_sec: List[float]
    bytes_per_key: float
    flags: List[str] = field(default_factory=list)

    @property
    def median_wall_ns(self) -> int:
        return int(median(self.wall_ns))

    @property
    def median_ops_per_sec(self) -> float:
        return float(median(self.ops_per_sec))


def _timed(fn) -> int:
    t0 = time.perf_counter_ns()
    fn()
    return time.perf_counter_ns() - t0


# -- microbenchmarks ----------------------------------------------------------


def _micro_blocks(codec, rows: np.ndarray) -> List[CompressedBlock]:
    """Chunk generated rows into codec-sized blocks."""
    blocks = []
    step = codec.max_keys
    for row in rows:
        start = 0
        for lo in range(0, row.size, step):
            chunk = row[lo:lo + step]
            blocks.append(codec.compress(chunk, start))
            start = int(chunk[-1])
    return blocks


def _verify_micro(codec, rows: np.ndarray, rng: np.random.Generator) -> None:
    sample = rows[:min(8, len(rows))]
    for row in sample:
        start = 0
        for lo in range(0, row.size, codec.max_keys):
            chunk = row[lo:lo + codec.max_keys]
            blk = codec.compress(chunk, start)
            if not np.array_equal(codec.decompress(blk), chunk):
                raise CorrectnessError("decompress disagrees with its input")
            for slot in rng.integers(0, chunk.size, size=8):
                if codec.select(blk, int(slot)) != int(chunk[slot]):
                    raise CorrectnessError("select disagrees with the input")
            for target in rng.integers(1, int(chunk[-1]) + 2, size=8):
                target = int(target)
                expect = None
                i = int(np.searchsorted(chunk, np.uint32(target)))
                if i < chunk.size:
                    expect = (i, int(chunk[i]))
                if codec.find_lower_bound(blk, target) != expect:
                    raise CorrectnessError("find disagrees with a scan")
            rebuilt = CompressedBlock(b"", 0, 0, start, start)
            for key in rng.permutation(chunk):
                result = codec.insert(rebuilt, int(key))
                if result is None:
                    raise CorrectnessError("insert reported a false duplicate")
                rebuilt = result[0]
            if not np.array_equal(codec.decompress(rebuilt), chunk):
                raise CorrectnessError("random-order inserts lost keys")
            start = int(chunk[-1])


def run_micro(codec_name: str, spec: MicroSpec, op: str, runs: int = 3,
              n: int = 1 << 17,
              block_size: Optional[int] = None) -> BenchReport:
    """Time one codec kernel over freshly generated blocks."""
    if op not in MICRO_OPS:
        raise ValueError(f"unknown micro op {op!r}")
    codec = get_codec(CODEC_NAMES[codec_name], block_size)
    rows = gen_micro_keys(spec, count=max(n // spec.block_len, 1))
    total = int(rows.size)
    rng = np.random.default_rng(spec.seed + 1)
    _verify_micro(codec, rows, rng)
    blocks = _micro_blocks(codec, rows)
    payload = sum(len(b.payload) + DESC_BYTES for b in blocks)

    if op == "decompress":
        decompress = codec.decompress

        def body():
            for blk in blocks:
                decompress(blk)
    elif op == "select":
        picks = [(blocks[i], int(s)) for i, s in zip(
            rng.integers(0, len(blocks), size=total),
            rng.integers(0, codec.max_keys, size=total))]
        picks = [(blk, s % blk.n) for blk, s in picks]
        select = codec.select

        def body():
            for blk, slot in picks:
                select(blk, slot)
    elif op == "find":
        probes = [(blocks[i], int(t)) for i, t in zip(
            rng.integers(0, len(blocks), size=total),
            rng.integers(1, 1 << 31, size=total))]
        probes = [(blk, 1 + t % blk.last) for blk, t in probes]
        find = codec.find_lower_bound

        def body():
            for blk, target in probes:
                find(blk, target)
    else:  # insert-from-random
        jobs = []
        for row in rows:
            start = 0
            for lo in range(0, row.size, codec.max_keys):
                chunk = row[lo:lo + codec.max_keys]
                jobs.append((start, [int(k) for k in rng.permutation(chunk)]))
                start = int(chunk[-1])
        insert = codec.insert

        def body():
            for start, keys in jobs:
                blk = CompressedBlock(b"", 0, 0, start, start)
                for key in keys:
                    blk = insert(blk, key)[0]

    walls = [_timed(body) for _ in range(runs)]
    ops = [total / (w / 1e9) for w in walls]
    return BenchReport(benchmark=f"micro-{op}-b{spec.b}", codec=codec_name,
                       n=total, block_size=codec.max_keys, wall_ns=walls,
                       ops_per_sec=ops, bytes_per_key=payload / total)


# -- database benchmarks -------------------------------------------------------


def _build_db(path: str, codec_name: str, keys: Sequence[int],
              block_size: Optional[int], page_size: int) -> Database:
    db = Database.create(path, codec=codec_name, page_size=page_size,
                         block_size=block_size)
    insert = db.insert
    for k in keys:
        insert(k)
    return db


def _keylist_bytes(db: Database) -> int:
    return sum(leaf.kl.used() for leaf in db._leaves())


def _verify_db(db: Database, keys: np.ndarray, threshold: int) -> None:
    n = int(keys.size)
    if db.key_count() != n:
        raise CorrectnessError("key count differs from the generator's")
    scanned = np.fromiter((k for k, _ in db.cursor()), dtype=np.uint32,
                          count=n)
    if not np.array_equal(scanned, keys):
        raise CorrectnessError("cursor scan differs from the generator")
    if db.max_key() != int(keys[-1]):
        raise CorrectnessError("max key differs from the generator")
    rng = np.random.default_rng(0xC0FFEE)
    for k in rng.choice(keys, size=min(1000, n), replace=False):
        if db.find(int(k)) is None:
            raise CorrectnessError("an inserted key cannot be found")
    top = int(keys[-1])
    for probe in range(top + 1, top + 101):
        if db.find(probe) is not None:
            raise CorrectnessError("an absent key was found")
    if db.sum_keys() != int(keys.astype(np.uint64).sum()):
        raise CorrectnessError("sum of keys differs from the generator")
    picked = keys[keys > threshold]
    expect = (None, 0) if picked.size == 0 else (
        Fraction(int(picked.astype(np.uint64).sum()), int(picked.size)),
        int(picked.size))
    if db.average_where_gt(threshold) != expect:
        raise CorrectnessError("filtered average differs from a scan")


def run_db_battery(codec_name: str, n: int, block_size: Optional[int] = None,
                   seed: int = 0, runs: int = 3,
                   page_size: int = DEFAULT_PAGE_SIZE,
                   workdir: Optional[str] = None) -> List[BenchReport]:
    """Build a database from clustered keys and time the five workloads."""
    spec = ClusterDataSpec(n, seed)
    keys = gen_clusterdata(spec)
    key_list = [int(k) for k in keys]
    threshold = spec.range_max // 2
    tmp = workdir or tempfile.mkdtemp(prefix="packtree-bench-")
    effective_block = (get_codec(CODEC_NAMES[codec_name], block_size)
                       .max_keys)

    def common(name, walls, bytes_per_key, flags=()):
        return BenchReport(benchmark=f"db-{name}", codec=codec_name, n=n,
                           block_size=effective_block, wall_ns=walls,
                           ops_per_sec=[n / (w / 1e9) for w in walls],
                           bytes_per_key=bytes_per_key, flags=list(flags))

    try:
        # correctness pass on an untimed build, before any timing
        db = _build_db(os.path.join(tmp, "verify.db"), codec_name, key_list,
                       block_size, page_size)
        _verify_db(db, keys, threshold)
        db.flush()
        kl_bytes = _keylist_bytes(db)
        file_bytes = db._store.page_count * page_size
        bytes_per_key = kl_bytes / n
        size_flags = (f"whole_file_bytes_per_key={file_bytes / n:.4f}",)
        db.close()

        walls = []
        db = None
        for r in range(runs):
            if db is not None:
                db.close()
            path = os.path.join(tmp, f"run{r}.db")
            t0 = time.perf_counter_ns()
            db = _build_db(path, codec_name, key_list, block_size, page_size)
            walls.append(time.perf_counter_ns() - t0)
            if db.key_count() != n:
                raise CorrectnessError("a timed build lost keys")
        reports = [common("insert", walls, bytes_per_key, size_flags)]

        found = 0

        def lookup_all():
            nonlocal found
            found = 0
            find = db.find
            for k in key_list:
                if find(k) is not None:
                    found += 1

        walls = [_timed(lookup_all) for _ in range(runs)]
        if found != n:
            raise CorrectnessError("lookups missed inserted keys")
        reports.append(common("lookup", walls, bytes_per_key))

        seen = 0

        def scan_all():
            nonlocal seen
            seen = 0
            cur = db.cursor()
            step = cur.next
            while step() is not None:
                seen += 1

        walls = [_timed(scan_all) for _ in range(runs)]
        if seen != n:
            raise CorrectnessError("cursor scan missed keys")
        reports.append(common("cursor", walls, bytes_per_key))

        expected_sum = int(keys.astype(np.uint64).sum())
        total = 0

        def sum_all():
            nonlocal total
            total = db.sum_keys()

        walls = [_timed(sum_all) for _ in range(runs)]
        if total != expected_sum:
            raise CorrectnessError("sum of keys differs from the generator")
        reports.append(common("sum", walls, bytes_per_key))

        result = (None, 0)

        def avg_filtered():
            nonlocal result
            result = db.average_where_gt(threshold)

        walls = [_timed(avg_filtered) for _ in range(runs)]
        picked = keys[keys > threshold]
        if result[1] != int(picked.size):
            raise CorrectnessError("filtered average count differs")
        reports.append(common("avg-filter", walls, bytes_per_key))
        db.close()
        return reports
    finally:
        if workdir is None:
            shutil.rmtree(tmp, ignore_errors=True)


# -- reporting -----------------------------------------------------------------


def soft_sanity_flags(reports: Sequence[BenchReport]) -> List[str]:
    """Directional speed expectations; violations are reported, not fatal.

    Bit-packed decoding is expected to beat byte-at-a-time varint decoding
    at widths up to 16, and offset-packed select to be at least as fast as
    delta-packed select.
    """
    by_key = {(r.benchmark, r.codec): r for r in reports}
    notes = []
    for (name, codec), rep in by_key.items():
        if not name.startswith("micro-decompress-b") or codec != "bp128":
            continue
        b = int(name.rsplit("b", 1)[1])
        other = by_key.get((name, "vbyte"))
        if other and 1 <= b <= 16 and (rep.median_ops_per_sec
                                       < other.median_ops_per_sec):
            notes.append(f"soft-sanity: bp128 decompress slower than vbyte "
                         f"at b={b}")
    for (name, codec), rep in by_key.items():
        if not name.startswith("micro-select-") or codec != "simdfor":
            continue
        other = by_key.get((name, "bp128"))
        if other and rep.median_ops_per_sec < other.median_ops_per_sec:
            notes.append("soft-sanity: simdfor select slower than bp128")
    return notes


def emit_csv(reports: Sequence[BenchReport], out: TextIO) -> None:
    """Rows per run plus a median row, in a stable column order."""
    writer = csv.writer(out)
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        for i, (wall, ops) in enumerate(zip(rep.wall_ns, rep.ops_per_sec)):
            writer.writerow([rep.benchmark, rep.codec, rep.n, rep.block_size,
                             i, wall, f"{ops:.2f}",
                             f"{rep.bytes_per_key:.4f}"])
        writer.writerow([rep.benchmark, rep.codec, rep.n, rep.block_size,
                         "median", rep.median_wall_ns,
                         f"{rep.median_ops_per_sec:.2f}",
                         f"{rep.bytes_per_key:.4f}"])
