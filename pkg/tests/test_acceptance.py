"""Acceptance checklist for the package's externally visible guarantees.

One test per numbered guarantee, so a verbose run prints exactly one
pass/fail line for each. Items cover: encoded-format goldens, codec size
laws, delete stability, decoder equivalence, tree-vs-oracle behavior,
compression ratios at scale, balancing locality, split-on-delete,
analytics, the block-size study, and vector/scalar kernel agreement.
"""

import time
from fractions import Fraction

import numpy as np

from packtree import CodecId, Database
from packtree.bench import ClusterDataSpec, gen_clusterdata, run_db_battery
from packtree.bench.harness import _keylist_bytes
from packtree.codecs import CODEC_NAMES, get_codec
from packtree.codecs.masked import decode_vector
from packtree.codecs.varintgb import encode_deltas as gb_encode
from packtree.codecs.vbyte import decode_scalar, encode_value
from packtree.kernels import compute_deltas, prefix_sum, prefix_sum_vector4

BYTE_CODECS = ("vbyte", "maskedvbyte", "varintgb")
STABLE_DELETE_CODECS = ("vbyte", "maskedvbyte", "varintgb", "for", "simdfor")


def _record_for(key: int) -> bytes:
    return key.to_bytes(4, "little") * 2


def test_a01_format_goldens():
    """Known encodings are produced byte for byte, in under a second."""
    t0 = time.perf_counter()

    # VByte: seven payload bits per byte, least significant first, the
    # high bit cleared only on the final byte
    expect = {
        1: bytes([0b00000001]),
        2: bytes([0b00000010]),
        128: bytes([0b10000000, 0b00000001]),
        256: bytes([0b10000000, 0b00000010]),
        32768: bytes([0b10000000, 0b10000000, 0b00000010]),
    }
    vb = get_codec(CodecId.VBYTE)
    for value, encoding in expect.items():
        assert encode_value(value) == encoding
        assert vb.compress([value], 0).payload == encoding

    # VarIntGB: deltas (1024, 12, 10, 512) need byte lengths 2,1,1,2, so
    # one control byte 0b01_00_00_01 (first value's descriptor in the two
    # most significant bits) plus six data bytes, seven bytes total
    deltas = np.array([1024, 12, 10, 512], dtype=np.uint64)
    keys = np.cumsum(deltas).astype(np.uint32)
    gb = get_codec(CodecId.VARINTGB)
    blk = gb.compress(keys, 0)
    assert len(blk.payload) == 7
    assert blk.payload[0] == 0b01000001
    assert blk.payload == bytes([0b01000001, 0x00, 0x04, 12, 10, 0x00, 0x02])
    assert blk.payload == gb_encode(deltas)

    # FOR: {500, 521, 531, 574} packs offsets {0, 21, 31, 74} from the
    # first key at bit width 7 (the span 74 needs seven bits)
    fr = get_codec(CodecId.FOR)
    blk = fr.compress([500, 521, 531, 574], 0)
    assert blk.meta == 7
    assert blk.start == 500
    assert len(blk.payload) == (4 * 7 + 7) // 8
    packed = int.from_bytes(blk.payload, "little")
    assert [(packed >> (7 * i)) & 0x7F for i in range(4)] == [0, 21, 31, 74]

    assert time.perf_counter() - t0 < 1.0


def test_a02_bp128_payload_is_exactly_128b_bits():
    """A full 128-delta block at width b stores exactly 128*b payload bits."""
    bp = get_codec(CodecId.BP128)
    assert bp.max_keys == 128
    for b in range(0, 33):
        assert bp.payload_bytes(128, b) * 8 == 128 * b
    # physical blocks for every reachable width; width 0 cannot occur for
    # a full block because strictly ascending keys force deltas >= 1
    for b in range(1, 33):
        keys = np.arange(1, 129, dtype=np.uint64) + ((1 << (b - 1)) - 1)
        blk = bp.compress(keys.astype(np.uint32), 0)
        assert blk.meta == b
        assert len(blk.payload) * 8 == 128 * b


def test_a03_delete_stability():
    """Byte and offset codecs never grow on delete; BP128 provably can."""
    rng = np.random.default_rng(0xD57AB1E)
    cases = 100_000
    deltas = rng.integers(1, 1001, size=(cases, 4), dtype=np.int64)
    key_rows = np.cumsum(deltas, axis=1).astype(np.uint32)
    slots = rng.integers(0, 4, size=cases)
    codecs = [get_codec(CODEC_NAMES[name]) for name in STABLE_DELETE_CODECS]
    for row, slot in zip(key_rows, slots):
        for codec in codecs:
            _, growth = codec.delete(codec.compress(row, 0), int(slot))
            assert growth <= 0

    # merging deltas 1+1=2 widens the shared bit width from 1 to 2
    bp = get_codec(CodecId.BP128)
    blk = bp.compress([1, 2, 3, 4], 0)
    assert blk.meta == 1
    after, growth = bp.delete(blk, 1)
    assert after.meta == 2
    assert growth > 0


def test_a04_masked_vbyte_equals_vbyte():
    """Payload bytes and decode output match plain VByte on fuzzed blocks."""
    vb = get_codec(CodecId.VBYTE)
    mv = get_codec(CodecId.MASKEDVBYTE)
    rng = np.random.default_rng(0xFACADE)
    batches = (  # count, keys per block, delta ceiling (exercises 1-5 bytes)
        (250_000, 4, 1 << 7),
        (250_000, 8, 1 << 14),
        (250_000, 6, 1 << 28),
        (250_000, 2, 1 << 30),
    )
    total = 0
    for count, width, hi in batches:
        rows = np.cumsum(
            rng.integers(1, hi, size=(count, width), dtype=np.uint64),
            axis=1).astype(np.uint32)
        for row in rows:
            a = vb.compress(row, 0)
            b = mv.compress(row, 0)
            assert a.payload == b.payload
            assert np.array_equal(mv.decompress(b), vb.decompress(a))
            total += 1
    assert total == 1_000_000


def test_a05_tree_matches_sorted_map_oracle(tmp_path):
    """10^6 mixed operations per codec behave exactly like a sorted map."""
    ops_target = 1_000_000
    domain = 300_000
    for seed, codec in enumerate(CODEC_NAMES):
        rng = np.random.default_rng(0xACE0 + seed)
        db = Database.create(str(tmp_path / f"oracle-{codec}.db"),
                             codec=codec, page_size=4096)
        oracle = {}
        t0 = time.perf_counter()
        ops = 0
        since_check = 0
        while ops < ops_target:
            batch = min(100_000, ops_target - ops)
            actions = rng.random(batch)
            picks = rng.integers(0, domain, size=batch)
            for a, k in zip(actions, picks):
                k = int(k)
                if a < 0.40:
                    assert db.insert(k, _record_for(k)) is (k not in oracle)
                    oracle[k] = _record_for(k)
                elif a < 0.65:
                    assert db.erase(k) is (k in oracle)
                    oracle.pop(k, None)
                else:
                    assert db.find(k) == oracle.get(k)
            ops += batch
            since_check += batch
            if since_check >= 200_000 or ops >= ops_target:
                since_check = 0
                want = np.sort(np.fromiter(oracle.keys(), dtype=np.uint32,
                                           count=len(oracle)))
                scanned = list(db.cursor())
                assert np.array_equal(
                    np.array([k for k, _ in scanned], dtype=np.uint32), want)
                assert all(r == oracle[k] for k, r in scanned)
                assert db.key_count() == len(oracle)
                assert db.max_key() == (int(want[-1]) if want.size else None)
                assert db.sum_keys() == int(want.astype(np.uint64).sum())
        db.close()
        assert time.perf_counter() - t0 < 300, f"{codec} exceeded 5 minutes"


def test_a06_compression_ordering_at_desk_scale(tmp_path):
    """Clustered 10^6 keys: packed < vbyte <= group/offset < raw ~= 4.0."""
    n = 1_000_000
    keys = [int(k) for k in gen_clusterdata(ClusterDataSpec(n, seed=97))]
    sizes = {}
    for codec in ("uncompressed", "vbyte", "varintgb", "for", "simdfor",
                  "bp128"):
        db = Database.create(str(tmp_path / f"c-{codec}.db"), codec=codec)
        insert = db.insert
        for k in keys:
            insert(k)
        assert db.key_count() == n
        sizes[codec] = _keylist_bytes(db) / n
        db.close()
        (tmp_path / f"c-{codec}.db").unlink()

    assert sizes["bp128"] < sizes["vbyte"]
    assert sizes["vbyte"] <= sizes["varintgb"]
    assert sizes["vbyte"] <= sizes["for"]
    assert sizes["vbyte"] <= sizes["simdfor"]
    for codec in ("varintgb", "for", "simdfor"):
        assert sizes[codec] < sizes["uncompressed"]
    assert abs(sizes["uncompressed"] - 4.0) <= 0.2

    # fully sequential keys compress at least eightfold under bit packing
    seq = {}
    for codec in ("bp128", "uncompressed"):
        db = Database.create(str(tmp_path / f"s-{codec}.db"), codec=codec)
        insert = db.insert
        for k in range(n):
            insert(k)
        seq[codec] = _keylist_bytes(db) / n
        db.close()
        (tmp_path / f"s-{codec}.db").unlink()
    assert seq["uncompressed"] / seq["bp128"] >= 8.0


def test_a07_mutations_dirty_only_local_pages(tmp_path):
    """10^5 fuzzed mutations each write only the leaf, siblings, parent."""
    plans = (("vbyte", 60_000), ("bp128", 40_000))
    for codec, ops in plans:
        rng = np.random.default_rng(0xB0A7 + ops)
        db = Database.create(str(tmp_path / f"local-{codec}.db"),
                             codec=codec, page_size=1024)
        inserts = rng.integers(0, 60_000, size=ops)
        coins = rng.random(ops)
        for coin, k in zip(coins, inserts):
            if coin < 0.6:
                db.insert(int(k))
            else:
                db.erase(int(k))
            allowed = {db.last_op_leaf, db.last_op_parent}
            for event in db.last_op_events:
                assert len(event.pages) <= 4, event
                allowed.update(event.pages)
            stray = set(db.last_op_pages) - allowed
            assert not stray, (codec, stray, db.last_op_events)
        db.close()


def test_a08_split_on_delete_dense_bp128(tmp_path):
    """Deleting from a page-exact bit-packed leaf forces a split; the tree
    stays oracle-equivalent afterward."""
    # 1679 keys at stride 2049 (12-bit deltas) fill a 16 KiB leaf to the
    # byte; removing one key merges two deltas into a 13-bit value, so the
    # rebuilt block family no longer fits and the leaf must split
    db = Database.create(str(tmp_path / "dense.db"), codec="bp128",
                         page_size=16384, block_size=128)
    keys = [i * 2049 for i in range(1, 1680)]
    for k in keys:
        db.insert(k, _record_for(k))
    assert not any(e.kind.startswith("split") for e in db.last_op_events)

    victim = keys[5]
    assert db.erase(victim)
    kinds = [e.kind for e in db.last_op_events]
    assert any(k.startswith("split") for k in kinds), kinds

    oracle = {k: _record_for(k) for k in keys if k != victim}
    assert [k for k, _ in db.cursor()] == sorted(oracle)

    rng = np.random.default_rng(0x5EED)
    coins = rng.random(20_000)
    picks = rng.integers(1, 1700, size=20_000)
    for coin, i in zip(coins, picks):
        k = int(i) * 2049
        if coin < 0.5:
            assert db.insert(k, _record_for(k)) is (k not in oracle)
            oracle[k] = _record_for(k)
        else:
            assert db.erase(k) is (k in oracle)
            oracle.pop(k, None)
    assert [(k, r) for k, r in db.cursor()] == sorted(oracle.items())
    db.close()


def test_a09_analytics_sum_and_filtered_average(tmp_path):
    """sum over 0..n-1 is n(n-1)/2 at n=10^6; averages match brute force."""
    n = 1_000_000
    db = Database.create(str(tmp_path / "seq.db"), codec="vbyte")
    insert = db.insert
    for k in range(n):
        insert(k)
    assert db.sum_keys() == n * (n - 1) // 2
    assert db.key_count() == n
    db.close()
    (tmp_path / "seq.db").unlink()

    rng = np.random.default_rng(0xAB5)
    codecs = list(CODEC_NAMES)
    for trial in range(12):
        size = int(rng.integers(1_000, 15_000))
        keys = np.unique(rng.integers(0, 1 << 31, size=size, dtype=np.uint32))
        db = Database.create(str(tmp_path / f"avg{trial}.db"),
                             codec=codecs[trial % len(codecs)])
        for k in keys:
            db.insert(int(k))
        thresholds = [0, int(keys[-1]), int(keys[0]),
                      int(rng.integers(0, 1 << 31)), 0xFFFFFFFF]
        for t in thresholds:
            picked = keys[keys > t]
            if picked.size == 0:
                expect = (None, 0)
            else:
                expect = (Fraction(int(picked.astype(np.uint64).sum()),
                                   int(picked.size)), int(picked.size))
            assert db.average_where_gt(t) == expect
        db.close()


def test_a10_block_size_study(tmp_path):
    """The battery runs at block sizes 128 and 256; byte codecs shrink."""
    for codec in BYTE_CODECS + ("uncompressed",):
        sizes = {}
        for block_size in (128, 256):
            workdir = tmp_path / f"{codec}-{block_size}"
            workdir.mkdir()
            reports = run_db_battery(codec, n=65_536, block_size=block_size,
                                     seed=5, runs=1, workdir=str(workdir))
            by_name = {r.benchmark: r for r in reports}
            assert by_name["db-sum"].median_wall_ns > 0
            assert by_name["db-insert"].block_size == block_size
            sizes[block_size] = by_name["db-sum"].bytes_per_key
        assert sizes[256] <= sizes[128], (codec, sizes)


def test_a11_vector_kernels_match_scalar():
    """Vector prefix sum and the vectorized VByte decoder are bit-identical
    to their scalar counterparts on over 10^6 fuzzed values."""
    rng = np.random.default_rng(0x51D)
    rows = rng.integers(0, 1 << 32, size=(8192, 128), dtype=np.uint32)
    starts = rng.integers(0, 1 << 32, size=8192, dtype=np.uint32)
    for row, start in zip(rows, starts):
        assert np.array_equal(prefix_sum_vector4(row, int(start)),
                              prefix_sum(row, int(start)))
    assert rows.size >= 1_000_000

    from packtree.codecs.vbyte import encode_deltas
    decoded = 0
    ceilings = (1 << 7, 1 << 14, 1 << 21, 1 << 25)
    deltas = [rng.integers(1, ceilings[i % 4], size=(4096, 64),
                           dtype=np.uint64) for i in range(4)]
    key_rows = [np.cumsum(d, axis=1).astype(np.uint32)
                for d in deltas]
    wide = np.cumsum(rng.integers(1, 1 << 30, size=(2048, 2),
                                  dtype=np.uint64), axis=1).astype(np.uint32)
    for batch in key_rows + [wide]:
        for row in batch:
            payload = encode_deltas(compute_deltas(row, 0))
            n = int(row.size)
            assert decode_vector(payload, n, 0) == decode_scalar(payload, n, 0)
            decoded += n
    assert decoded >= 1_000_000
