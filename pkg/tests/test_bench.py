"""Benchmark plumbing: generators, harness reports, CSV, CLI."""

import csv
import io

import numpy as np
import pytest

from packtree.bench import (BenchReport, ClusterDataSpec, CorrectnessError,
                            MicroSpec, emit_csv, gen_clusterdata,
                            gen_micro_keys, run_db_battery, run_micro)
from packtree.bench.cli import main
from packtree.bench.harness import CSV_COLUMNS, MICRO_OPS, soft_sanity_flags


# -- clustered keys -------------------------------------------------------------

def test_clusterdata_pigeonhole_tight():
    keys = gen_clusterdata(ClusterDataSpec(n=8, seed=1))
    assert len(keys) == 8
    assert len(set(keys.tolist())) == 8
    assert keys.max() < 9


@pytest.mark.parametrize("n", [1, 100, 50000])
def test_clusterdata_bounds_and_distinctness(n):
    spec = ClusterDataSpec(n=n, seed=42)
    keys = gen_clusterdata(spec)
    assert keys.dtype == np.uint32
    assert len(keys) == n
    assert np.all(np.diff(keys.astype(np.int64)) > 0)
    assert int(keys.max()) < spec.range_max


def test_clusterdata_deterministic():
    spec = ClusterDataSpec(n=20000, seed=7)
    a = gen_clusterdata(spec)
    b = gen_clusterdata(spec)
    assert np.array_equal(a, b)
    c = gen_clusterdata(ClusterDataSpec(n=20000, seed=8))
    assert not np.array_equal(a, c)


def test_clusterdata_is_clustered():
    # dense runs make the median gap 1 even though the space is wider
    keys = gen_clusterdata(ClusterDataSpec(n=30000, seed=3)).astype(np.int64)
    gaps = np.diff(keys)
    assert np.median(gaps) == 1


# -- micro blocks ---------------------------------------------------------------

def test_micro_keys_zero_width_is_constant_steps():
    rows = gen_micro_keys(MicroSpec(b=0, seed=1), count=4)
    assert rows.shape == (4, 256)
    assert np.array_equal(rows[0], np.arange(1, 257, dtype=np.uint32))


@pytest.mark.parametrize("b", [1, 7, 24])
def test_micro_keys_deltas_in_range(b):
    rows = gen_micro_keys(MicroSpec(b=b, seed=5), count=16)
    deltas = np.diff(rows.astype(np.int64), axis=1)
    assert deltas.min() >= 1
    assert deltas.max() < (1 << b) or b == 0
    first = rows[:, 0].astype(np.int64)
    assert first.min() >= 1 and first.max() < (1 << b) + 1
    # b = 24 is the largest width whose 256-delta sum still fits in 32 bits
    assert int(rows.max()) <= 0xFFFFFFFF


def test_micro_keys_rejects_wide_deltas():
    with pytest.raises(ValueError):
        gen_micro_keys(MicroSpec(b=25), count=1)


# -- harness --------------------------------------------------------------------

@pytest.mark.parametrize("op", MICRO_OPS)
def test_run_micro_reports(op):
    rep = run_micro("vbyte", MicroSpec(b=6, seed=2), op, runs=2, n=1024)
    assert rep.benchmark == f"micro-{op}-b6"
    assert rep.codec == "vbyte"
    assert rep.n == 1024
    assert len(rep.wall_ns) == 2 and len(rep.ops_per_sec) == 2
    assert all(w > 0 for w in rep.wall_ns)
    assert rep.bytes_per_key > 0


def test_micro_bp128_size_matches_width_law():
    rep = run_micro("bp128", MicroSpec(b=7, seed=2), "decompress", runs=1,
                    n=2048)
    # b bits per key plus one 16-byte descriptor per 128 keys
    assert rep.bytes_per_key == pytest.approx(7 / 8 + 16 / 128)


def test_micro_deterministic_size():
    a = run_micro("varintgb", MicroSpec(b=9, seed=11), "decompress", runs=1,
                  n=2048)
    b = run_micro("varintgb", MicroSpec(b=9, seed=11), "find", runs=1, n=2048)
    assert a.bytes_per_key == b.bytes_per_key


def test_run_db_battery_reports(tmp_path):
    reports = run_db_battery("vbyte", n=2000, seed=3, runs=1,
                             workdir=str(tmp_path))
    assert [r.benchmark for r in reports] == [
        "db-insert", "db-lookup", "db-cursor", "db-sum", "db-avg-filter"]
    assert all(r.n == 2000 for r in reports)
    assert len({r.bytes_per_key for r in reports}) == 1
    assert any(f.startswith("whole_file_bytes_per_key=")
               for f in reports[0].flags)


def test_db_battery_deterministic_sizes(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = run_db_battery("varintgb", n=1500, seed=9, runs=1,
                       workdir=str(tmp_path / "a"))
    b = run_db_battery("varintgb", n=1500, seed=9, runs=1,
                       workdir=str(tmp_path / "b"))
    assert a[0].bytes_per_key == b[0].bytes_per_key


# -- csv ------------------------------------------------------------------------

def _fake_report(**kw):
    base = dict(benchmark="micro-find-b4", codec="vbyte", n=10, block_size=256,
                wall_ns=[30, 10, 20], ops_per_sec=[10 / 30e-9, 1e9, 5e8],
                bytes_per_key=1.25)
    base.update(kw)
    return BenchReport(**base)


def test_emit_csv_layout():
    out = io.StringIO()
    emit_csv([_fake_report()], out)
    rows = list(csv.reader(io.StringIO(out.getvalue())))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 1 + 3 + 1  # header, three runs, median
    assert [r[4] for r in rows[1:]] == ["0", "1", "2", "median"]
    assert rows[4][5] == "20"  # median wall of 30, 10, 20
    # parse roundtrip
    for row in rows[1:]:
        assert int(row[2]) == 10
        assert float(row[7]) == 1.25


def test_soft_sanity_flags_direction():
    fast = _fake_report(benchmark="micro-decompress-b8", codec="bp128",
                        wall_ns=[10], ops_per_sec=[1000.0])
    slow = _fake_report(benchmark="micro-decompress-b8", codec="vbyte",
                        wall_ns=[20], ops_per_sec=[500.0])
    assert soft_sanity_flags([fast, slow]) == []
    notes = soft_sanity_flags([
        _fake_report(benchmark="micro-decompress-b8", codec="bp128",
                     wall_ns=[20], ops_per_sec=[500.0]),
        _fake_report(benchmark="micro-decompress-b8", codec="vbyte",
                     wall_ns=[10], ops_per_sec=[1000.0]),
    ])
    assert notes and "bp128" in notes[0]


# -- cli ------------------------------------------------------------------------

def test_cli_micro_stdout(capsys):
    assert main(["micro", "--codec", "vbyte", "--b", "4", "--n", "1024",
                 "--runs", "1"]) == 0
    out = capsys.readouterr().out
    header = out.splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    assert "micro-decompress-b4" in out


def test_cli_db_writes_csv_and_figures(tmp_path):
    out = tmp_path / "report.csv"
    code = main(["db", "--codec", "vbyte", "--n", "1500", "--runs", "1",
                 "--out", str(out)])
    assert code == 0
    assert out.exists()
    assert (tmp_path / "report-throughput.png").exists()
    assert (tmp_path / "report-size.png").exists()
    rows = list(csv.reader(out.open()))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 1 + 5 * 2  # five workloads, one run + median each


def test_cli_rejects_unknown_codec(capsys):
    with pytest.raises(SystemExit):
        main(["micro", "--codec", "nosuch"])


def test_cli_exits_nonzero_on_correctness_failure(monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise CorrectnessError("forced for the test")

    monkeypatch.setattr("packtree.bench.harness._verify_db", broken)
    assert main(["db", "--codec", "vbyte", "--n", "1000", "--runs", "1"]) == 1
    assert "correctness failure" in capsys.readouterr().err
