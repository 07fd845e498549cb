import numpy as np
import pytest

from packtree.codecs import CodecId, get_codec
from packtree.errors import NeedsSpaceError
from packtree.keylist import DESC_BYTES, HEADER_BYTES, KeyList

ALL_IDS = list(CodecId)
BIG = 16 * 1024


def make(codec_id, capacity=BIG, max_keys=None):
    return KeyList(get_codec(codec_id, max_keys), capacity)


def fill(kl, keys):
    for key in keys:
        assert kl.insert(key) is not None
    return kl


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_insert_find_delete_roundtrip(codec_id):
    kl = make(codec_id)
    keys = list(range(10, 4000, 7))
    fill(kl, keys)
    assert kl.key_count == len(keys)
    assert kl.keys().tolist() == keys
    for k in keys[::13]:
        assert kl.find_slot(k) == keys.index(k)
    assert kl.find_slot(11) is None
    assert kl.delete(keys[5]) == 5
    assert kl.find_slot(keys[5]) is None
    assert kl.delete(keys[5]) is None
    assert kl.key_count == len(keys) - 1


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_insert_slot_is_rank(codec_id):
    rng = np.random.default_rng(3)
    kl = make(codec_id)
    oracle = []
    for key in rng.permutation(np.arange(0, 6000, 3)):
        key = int(key)
        slot = kl.insert(key)
        assert slot is not None
        oracle.insert(slot, key)
        assert oracle[slot] == key
    assert kl.keys().tolist() == sorted(oracle)


def test_insert_existing_returns_none():
    kl = fill(make(CodecId.VBYTE), [5, 10, 15])
    assert kl.insert(10) is None
    assert kl.key_count == 3


def test_locate_picks_block_by_start():
    kl = fill(make(CodecId.VBYTE, max_keys=4), range(0, 3000, 250))
    starts = [b.start for b in kl.blocks]
    assert len(starts) > 2
    assert kl._locate(1500) == max(j for j, s in enumerate(starts) if s <= 1500)
    assert kl._locate(-1 & 0) == 0  # smaller than every start -> block 0


def test_full_block_mid_insert_splits_it():
    kl = make(CodecId.VBYTE)
    keys = list(range(0, 512, 2))
    fill(kl, keys)
    assert len(kl.blocks) == 1
    assert kl.insert(3) == 2
    assert len(kl.blocks) == 2
    assert sum(b.n for b in kl.blocks) == 257
    assert kl.keys().tolist() == sorted(keys + [3])


def test_full_block_append_opens_new_block():
    kl = make(CodecId.VBYTE)
    fill(kl, range(257))
    assert len(kl.blocks) == 2
    assert [b.n for b in kl.blocks] == [256, 1]
    assert kl.keys().tolist() == list(range(257))


def test_lower_bound_skips_gaps_and_append_zones():
    kl = fill(make(CodecId.VBYTE, max_keys=4), [1, 2, 3, 4, 10, 20, 30, 40])
    assert len(kl.blocks) >= 2
    # empty out the first block to leave a gap
    for k in [1, 2, 3, 4]:
        assert kl.delete(k) is not None
    assert any(b.n == 0 for b in kl.blocks)
    assert kl.lower_bound(0) == (0, 10)
    assert kl.lower_bound(11) == (1, 20)
    assert kl.lower_bound(41) is None
    assert kl.keys().tolist() == [10, 20, 30, 40]


def test_gap_resurrection():
    kl = fill(make(CodecId.VBYTE, max_keys=4), [1, 2, 3, 4, 10, 20, 30, 40])
    for k in [10, 20, 30, 40]:
        kl.delete(k)
    gap_index = [j for j, b in enumerate(kl.blocks) if b.n == 0]
    assert gap_index
    assert kl.insert(15) == 4
    assert kl.keys().tolist() == [1, 2, 3, 4, 15]


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_insert_below_first_block_start(codec_id):
    kl = make(codec_id)
    fill(kl, [100, 200, 300])
    assert kl.blocks[0].start == 100
    assert kl.insert(50) == 0
    assert kl.keys().tolist() == [50, 100, 200, 300]
    assert kl.find_slot(50) == 0


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_vacuumize_drops_gaps_and_preserves_keys(codec_id):
    kl = make(codec_id, max_keys=8)
    keys = list(range(0, 640, 5))
    fill(kl, keys)
    for k in keys[24:40]:
        kl.delete(k)
    survivors = keys[:24] + keys[40:]
    assert kl.keys().tolist() == survivors
    used_before = kl.used()
    reclaimed = kl.vacuumize()
    assert reclaimed >= 0
    assert kl.used() == used_before - reclaimed
    assert kl.keys().tolist() == survivors
    assert all(b.n > 0 for b in kl.blocks)


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_vacuumize_idempotent(codec_id):
    kl = make(codec_id, max_keys=8)
    fill(kl, range(0, 400, 3))
    for k in list(range(0, 400, 3))[10:30]:
        kl.delete(k)
    kl.vacuumize()
    first = kl.serialize()
    assert kl.vacuumize() == 0
    assert kl.serialize() == first


def test_vacuumize_already_dense_is_identity_for_byte_codecs():
    kl = fill(make(CodecId.VBYTE, max_keys=8), range(64))
    before = kl.serialize()
    assert kl.vacuumize() == 0
    assert kl.serialize() == before


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_serialize_parse_roundtrip(codec_id):
    kl = make(codec_id, max_keys=8)
    fill(kl, range(0, 500, 3))
    for k in range(0, 200, 6):
        kl.delete(k)
    data = kl.serialize()
    back = KeyList.parse(data, kl.codec, kl.capacity)
    assert back.keys().tolist() == kl.keys().tolist()
    assert back.serialize() == data
    assert back.offsets == kl.offsets


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_split_partitions_keys(codec_id):
    kl = make(codec_id, max_keys=16)
    keys = list(range(0, 2000, 3))
    fill(kl, keys)
    pivot, right = kl.split()
    left_keys = kl.keys().tolist()
    right_keys = right.keys().tolist()
    assert left_keys + right_keys == keys
    assert left_keys[-1] < pivot == right_keys[0]
    assert kl.used() <= kl.capacity and right.used() <= right.capacity


def test_split_four_equal_blocks_two_and_two():
    kl = make(CodecId.UNCOMPRESSED, max_keys=4)
    fill(kl, range(16))
    assert len(kl.blocks) == 4
    pivot, right = kl.split()
    assert len(kl.blocks) == 2 and len(right.blocks) == 2
    assert pivot == 8


def test_split_balances_by_weight_not_first_past_half():
    # a trailing one-key packed block has zero payload bytes; the cut must
    # still separate the two substantial blocks instead of splitting off
    # just the freeloader
    kl = make(CodecId.FOR, max_keys=8)
    fill(kl, range(8))                                   # 3 payload bytes
    fill(kl, [200, 202, 204, 206, 208, 210, 212, 215])   # 4 payload bytes
    fill(kl, [100_000])                                  # 0 payload bytes
    assert [len(b.payload) for b in kl.blocks] == [3, 4, 0]
    pivot, right = kl.split(key_weight=8)
    assert pivot == 200
    assert kl.keys().tolist() == list(range(8))
    assert len(right.blocks) == 2
    assert right.keys().tolist() == [200, 202, 204, 206, 208, 210, 212, 215,
                                     100_000]


def test_split_single_block_splits_it_first():
    kl = make(CodecId.VBYTE)
    fill(kl, range(100))
    assert len(kl.blocks) == 1
    pivot, right = kl.split()
    assert kl.keys().tolist() == list(range(50))
    assert right.keys().tolist() == list(range(50, 100))
    assert pivot == 50


def test_needs_space_after_vacuumize_fails():
    kl = make(CodecId.UNCOMPRESSED, capacity=HEADER_BYTES + DESC_BYTES + 16)
    fill(kl, [1, 2, 3, 4])
    with pytest.raises(NeedsSpaceError):
        kl.insert(5)
    assert kl.keys().tolist() == [1, 2, 3, 4]


def test_bp128_delete_can_need_space():
    # dense unit deltas at capacity: widening b on delete overflows the node
    codec_capacity = HEADER_BYTES + DESC_BYTES * 2 + 2 * 16 + 8
    kl = make(CodecId.BP128, capacity=codec_capacity)
    fill(kl, range(1, 129))  # one full block at b=1 (16 payload bytes)
    fill(kl, range(129, 150))
    assert all(b.meta == 1 for b in kl.blocks if b.n)
    with pytest.raises(NeedsSpaceError):
        kl.delete(2)  # deltas [1,2,1...] need b=2: 32 bytes per block
    assert kl.find_slot(2) is not None


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_space_safety_under_fuzz(codec_id):
    rng = np.random.default_rng(int(codec_id) + 7)
    kl = make(codec_id, capacity=2048, max_keys=16)
    oracle = set()
    for _ in range(4000):
        key = int(rng.integers(0, 3000))
        try:
            if rng.random() < 0.6:
                slot = kl.insert(key)
                if slot is not None:
                    oracle.add(key)
                else:
                    assert key in oracle
            else:
                slot = kl.delete(key)
                if slot is not None:
                    oracle.remove(key)
                else:
                    assert key not in oracle
        except NeedsSpaceError:
            # a real node would split; emulate by evicting the upper half
            pivot, right = kl.split()
            oracle -= set(right.keys().tolist())
        assert kl.used() <= kl.capacity
    assert kl.keys().tolist() == sorted(oracle)


@pytest.mark.parametrize("codec_id", ALL_IDS, ids=lambda c: c.name)
def test_max_key_tracks_last_live_block(codec_id):
    kl = make(codec_id)
    assert kl.max_key() is None
    fill(kl, [5, 9, 12])
    assert kl.max_key() == 12
    kl.delete(12)
    assert kl.max_key() == 9
