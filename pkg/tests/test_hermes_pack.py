import logging

import numpy as np
import pytest

from src.services.errors import (
    CapacityError,
    MissingKeyError,
    ParameterError,
    RangeError,
    RefreshRequiredError,
    SlotIndexError,
)
from src.services.hermes_pack import HermesEngine, InsertMode, Op, OpTrace, SlotMask

T = 65537


def slots(engine, pv):
    return [int(v) for v in engine.decrypt_pack(pv)]


def expected_slots(values, n, t=T):
    out = [0] * n
    out[:len(values)] = values
    out[n - 1] = sum(values) % t
    return out


# ------------------------------------------------------------------ packing

def test_pack_layout(engine):
    pv = engine.pack_group([1, 2, 3])
    assert slots(engine, pv) == [1, 2, 3, 0, 0, 0, 0, 6]
    assert pv.length == 3
    assert engine.extract_sum(pv) == 6


def test_pack_uses_one_encryption(engine):
    mark = engine.trace.mark()
    engine.pack_group([4, 5, 6, 7, 8, 9, 10])
    assert engine.trace.since(mark) == [Op.ENCRYPT]


def test_pack_empty_is_inert(engine):
    pv = engine.pack_group([])
    assert pv.is_inert
    assert slots(engine, pv) == [0] * 8


def test_pack_aux_slot_reads_debug_sum(engine):
    pv = engine.pack_group([1000, 2000, 3000, 3200, 4000])
    assert engine.extract_sum(pv) == 13200


def test_pack_sum_wraps_mod_t(engine):
    pv = engine.pack_group([65000, 65000])
    assert engine.extract_sum(pv) == (130000) % T


def test_pack_errors(engine):
    with pytest.raises(CapacityError):
        engine.pack_group(range(8))
    with pytest.raises(RangeError):
        engine.pack_group([1, T])
    with pytest.raises(RangeError):
        engine.encrypt_singular(-1)


def test_pack_plain_has_no_aux_slot(engine):
    pv = engine.pack_plain(range(1, 9))
    assert not pv.has_aux
    assert pv.capacity == 8
    assert slots(engine, pv) == list(range(1, 9))
    with pytest.raises(ParameterError):
        engine.append(pv, 1)


# ------------------------------------------------------------------ insert / append

@pytest.mark.parametrize("mode", list(InsertMode))
def test_insert_shifts_suffix(engine, mode):
    pv = engine.pack_group([10, 20, 30])
    out = engine.insert_at(pv, 1, 15, mode=mode)
    assert out.length == 4
    assert slots(engine, out) == [10, 15, 20, 30, 0, 0, 0, 75]
    # o pacote original não muda
    assert pv.length == 3
    assert slots(engine, pv) == [10, 20, 30, 0, 0, 0, 0, 60]


def test_insert_at_end_and_front(engine):
    pv = engine.pack_group([5])
    pv = engine.insert_at(pv, 1, 7)
    assert slots(engine, pv) == [5, 7, 0, 0, 0, 0, 0, 12]
    pv = engine.insert_at(pv, 0, 3)
    assert slots(engine, pv) == [3, 5, 7, 0, 0, 0, 0, 15]


def test_insert_into_empty_pack(engine):
    pv = engine.insert_at(engine.pack_group([]), 0, 42)
    assert slots(engine, pv) == [42, 0, 0, 0, 0, 0, 0, 42]


def test_append(engine):
    pv = engine.append(engine.pack_group([1, 2]), 9)
    assert slots(engine, pv) == [1, 2, 9, 0, 0, 0, 0, 12]
    mark = engine.trace.mark()
    engine.append(pv, 1)
    assert engine.trace.since(mark) == [Op.ADD_PLAIN]


def test_update_errors(engine):
    full = engine.pack_group(range(1, 8))
    with pytest.raises(CapacityError):
        engine.insert_at(full, 0, 1)
    with pytest.raises(CapacityError):
        engine.append(full, 1)
    pv = engine.pack_group([1, 2, 3])
    with pytest.raises(SlotIndexError):
        engine.insert_at(pv, 4, 1)
    with pytest.raises(SlotIndexError):
        engine.insert_at(pv, -1, 1)
    with pytest.raises(SlotIndexError):
        engine.delete_at(pv, 3, 0)
    with pytest.raises(RangeError):
        engine.insert_at(pv, 0, T)


def test_insert_without_rotation_keys_raises(desk16):
    engine = HermesEngine(desk16.context, desk16.public_key, secret_key=desk16.secret_key)
    with pytest.raises(MissingKeyError):
        engine.insert_at(engine.pack_group([1]), 0, 2)


def test_append_matches_insert_at_end(engine, rng):
    for _ in range(50):
        length = int(rng.integers(0, 7))
        values = [int(v) for v in rng.integers(0, T, size=length)]
        v = int(rng.integers(0, T))
        pv = engine.pack_group(values)
        assert slots(engine, engine.append(pv, v)) == slots(engine, engine.insert_at(pv, length, v))


def test_plain_and_encrypted_modes_agree(engine, rng):
    for _ in range(10):
        values = [int(v) for v in rng.integers(0, T, size=4)]
        index, v = int(rng.integers(0, 5)), int(rng.integers(0, T))
        pv = engine.pack_group(values)
        plain = engine.insert_at(pv, index, v, mode=InsertMode.PLAIN)
        encrypted = engine.insert_at(pv, index, v, mode="encrypted")
        assert slots(engine, plain) == slots(engine, encrypted)


@pytest.mark.parametrize("mode", list(InsertMode))
def test_insert_op_sequence_does_not_depend_on_index(engine, mode):
    pv = engine.pack_group([10, 20, 30])
    sequences = []
    for index in range(4):
        mark = engine.trace.mark()
        engine.insert_at(pv, index, 1, mode=mode)
        sequences.append(engine.trace.since(mark))
    assert all(seq == sequences[0] for seq in sequences)
    assert sequences[0].count(Op.ROTATE) == 1
    assert sequences[0].count(Op.MULT_PLAIN) == 2


def test_delete_op_sequence_does_not_depend_on_index(engine):
    values = [10, 20, 30, 40]
    pv = engine.pack_group(values)
    sequences = []
    for index in range(4):
        mark = engine.trace.mark()
        engine.delete_at(pv, index, values[index])
        sequences.append(engine.trace.since(mark))
    assert all(seq == sequences[0] for seq in sequences)


def test_delete_masks_before_rotating_without_zeroing_pass(engine):
    pv = engine.pack_group([10, 20, 30, 40])
    mark = engine.trace.mark()
    out = engine.delete_at(pv, 1, 20)
    assert engine.trace.since(mark) == [Op.MULT_PLAIN, Op.MULT_PLAIN, Op.ROTATE, Op.ADD, Op.SUB_PLAIN]
    # o slot L-1 já chega zerado pela máscara de sufixo
    assert slots(engine, out) == [10, 30, 40, 0, 0, 0, 0, 80]


# ------------------------------------------------------------------ delete

def test_delete_pulls_suffix_left(engine):
    pv = engine.pack_group([10, 15, 20, 30])
    out = engine.delete_at(pv, 0, 10)
    assert out.length == 3
    assert slots(engine, out) == [15, 20, 30, 0, 0, 0, 0, 65]


def test_delete_middle_and_last(engine):
    pv = engine.pack_group([10, 15, 20, 30])
    assert slots(engine, engine.delete_at(pv, 2, 20)) == [10, 15, 30, 0, 0, 0, 0, 55]
    assert slots(engine, engine.delete_at(pv, 3, 30)) == [10, 15, 20, 0, 0, 0, 0, 45]


def test_delete_singleton_leaves_inert_pack(engine):
    pv = engine.delete_at(engine.pack_group([7]), 0, 7)
    assert pv.is_inert
    assert slots(engine, pv) == [0] * 8
    mark = engine.trace.mark()
    assert engine.delete_at(pv, 0, 0) is pv
    assert len(engine.trace.since(mark)) == 0


# ------------------------------------------------------------------ random sequences

def run_shadow(engine, rng, ops, n):
    """Sequência aleatória de insert/append/delete conferida contra uma lista em claro."""
    shadow = [int(v) for v in rng.integers(0, T, size=3)]
    pv = engine.pack_group(shadow)
    for _ in range(ops):
        choice = int(rng.integers(0, 3))
        if choice == 0 and len(shadow) < n - 1:
            index, v = int(rng.integers(0, len(shadow) + 1)), int(rng.integers(0, T))
            mode = InsertMode.ENCRYPTED if rng.random() < 0.3 else InsertMode.PLAIN
            pv = engine.insert_at(pv, index, v, mode=mode)
            shadow.insert(index, v)
        elif choice == 1 and len(shadow) < n - 1:
            v = int(rng.integers(0, T))
            pv = engine.append(pv, v)
            shadow.append(v)
        elif shadow:
            index = int(rng.integers(0, len(shadow)))
            pv = engine.delete_at(pv, index, shadow.pop(index))
        assert pv.length == len(shadow)
    return pv, shadow


def test_random_interleavings_match_shadow(desk32, rng):
    engine = desk32.engine()
    pv, shadow = run_shadow(engine, rng, 200, 16)
    assert slots(engine, pv) == expected_slots(shadow, 16)
    assert engine.refresh_count > 0


def test_fifty_random_inserts(desk32, rng):
    engine = desk32.engine()
    for _ in range(5):
        shadow, pv = [], engine.pack_group([])
        for _ in range(10):
            index, v = int(rng.integers(0, len(shadow) + 1)), int(rng.integers(0, T))
            pv = engine.insert_at(pv, index, v)
            shadow.insert(index, v)
        assert slots(engine, pv) == expected_slots(shadow, 16)


def test_random_state_index_value_triples(engine, rng):
    n = engine.slot_count
    for _ in range(1000):
        state = [int(v) for v in rng.integers(0, T, size=int(rng.integers(0, n - 1)))]
        pv = engine.pack_group(state)
        index, value = int(rng.integers(0, len(state) + 1)), int(rng.integers(0, T))

        inserted = engine.insert_at(pv, index, value)
        after = state[:index] + [value] + state[index:]
        got = slots(engine, inserted)
        assert got[:len(after)] == after
        assert got[len(after):n - 1] == [0] * (n - 1 - len(after))
        assert got[n - 1] == (sum(state) + value) % T

        index = int(rng.integers(0, len(after)))
        removed = engine.delete_at(inserted, index, after[index])
        rest = after[:index] + after[index + 1:]
        assert slots(engine, removed) == expected_slots(rest, n)
        assert removed.length == len(state)


# ------------------------------------------------------------------ aggregation

def test_global_sum_without_rotations(engine):
    a = engine.pack_group([10, 20, 30])
    b = engine.pack_group([10, 15, 20, 30])
    mark = engine.trace.mark()
    total = engine.global_sum([a, b])
    assert engine.trace.rotations(mark) == 0
    assert engine.extract_sum(total) == 135


def test_global_sum_single_pack_and_empty(engine):
    pv = engine.pack_group([4, 4])
    assert engine.extract_sum(engine.global_sum([pv])) == 8
    with pytest.raises(ParameterError):
        engine.global_sum([])


def test_global_sum_matches_total(desk32, rng):
    engine = desk32.engine()
    groups = [[int(v) for v in rng.integers(0, T, size=int(rng.integers(0, 16)))] for _ in range(7)]
    packs = [engine.pack_group(g, group_id=i) for i, g in enumerate(groups)]
    assert engine.extract_sum(engine.global_sum(packs)) == sum(map(sum, groups)) % T


def test_group_sum(engine):
    groups = {
        "B": [engine.pack_group([20]), engine.pack_group([2, 3])],
        "A": [engine.pack_group([10])],
        "C": [engine.pack_group([])],
    }
    sums = engine.group_sum(groups)
    assert list(sums) == ["A", "B", "C"]
    assert {key: engine.extract_sum(ct) for key, ct in sums.items()} == {"A": 10, "B": 25, "C": 0}


def test_rotation_baseline_sum(engine):
    pv = engine.pack_group([1, 2, 3])
    mark = engine.trace.mark()
    folded = engine.rotate_baseline_sum(pv)
    assert engine.trace.rotations(mark) == 3
    assert [int(v) for v in engine.decrypt_pack(folded)] == [12] * 8


def test_rotation_baseline_on_plain_pack_and_mask(engine):
    pv = engine.pack_plain([5, 1, 0, 2, 9, 9, 3, 4])
    assert int(engine.decrypt_pack(engine.rotate_baseline_sum(pv))[0]) == 33
    zero = engine.pack_plain([])
    assert [int(v) for v in engine.decrypt_pack(engine.rotate_baseline_sum(zero))] == [0] * 8
    masked = engine.mask_payload(engine.pack_group([1, 2, 3]))
    assert [int(v) for v in engine.decrypt_pack(engine.rotate_baseline_sum(masked))] == [6] * 8


# ------------------------------------------------------------------ decryption interface

def test_decrypt_slot(engine, caplog):
    pv = engine.pack_group([10, 20, 30])
    assert engine.decrypt_slot(pv, 1) == 20
    assert engine.decrypt_slot(pv, 5) == 0
    assert engine.decrypt_slot(pv, 7) == engine.extract_sum(pv)
    with caplog.at_level(logging.WARNING, logger="src.services.hermes_pack"):
        assert engine.decrypt_slot(pv, 8) is None
        assert engine.decrypt_slot(pv, -1) is None
    assert "NULL" in caplog.text


def test_decryption_needs_secret_key(desk16):
    engine = desk16.engine(secret_key=None)
    pv = engine.pack_group([1])
    with pytest.raises(MissingKeyError):
        engine.extract_sum(pv)
    assert engine.extract_sum(pv, secret_key=desk16.secret_key) == 1


# ------------------------------------------------------------------ noise maintenance

def test_refresh_preserves_content_and_restores_budget(engine):
    pv = engine.pack_group([10, 20, 30])
    for _ in range(2):
        pv = engine.insert_at(pv, 0, 1)
    before = engine.estimated_budget(pv)
    refreshed = engine.refresh(pv)
    assert slots(engine, refreshed) == slots(engine, pv)
    assert refreshed.length == pv.length
    assert engine.estimated_budget(refreshed) > before
    assert engine.refresh_count == 1


def test_auto_refresh_keeps_long_sequences_correct(engine):
    shadow = [1, 2, 3]
    pv = engine.pack_group(shadow)
    for step in range(10):
        if step % 2 == 0:
            pv = engine.insert_at(pv, 0, step + 100)
            shadow.insert(0, step + 100)
        else:
            pv = engine.delete_at(pv, 1, shadow.pop(1))
        assert engine.estimated_budget(pv) > 0
    assert engine.refresh_count >= 1
    assert slots(engine, pv) == expected_slots(shadow, 8)


def masked_chain(engine, rng, depth):
    """Pacote aleatório seguido de `depth` inserções/remoções; devolve (pv, lista em claro) a cada passo."""
    n = engine.slot_count
    shadow = [int(v) for v in rng.integers(0, T, size=int(rng.integers(1, n - depth)))]
    pv = engine.pack_group(shadow)
    for _ in range(depth):
        if shadow and rng.random() < 0.5:
            index = int(rng.integers(0, len(shadow)))
            pv = engine.delete_at(pv, index, shadow.pop(index))
        else:
            index, v = int(rng.integers(0, len(shadow) + 1)), int(rng.integers(0, T))
            pv = engine.insert_at(pv, index, v)
            shadow.insert(index, v)
        yield pv, list(shadow)


@pytest.mark.parametrize("keys", ["desk16", "desk32"])
def test_positive_estimated_budget_means_correct_decryption(keys, request, rng):
    engine = request.getfixturevalue(keys).engine(refresh_floor_bits=None)
    n = engine.slot_count
    checked = 0
    for _ in range(60):
        for pv, shadow in masked_chain(engine, rng, int(rng.integers(1, 5))):
            if engine.estimated_budget(pv) > 0:
                assert slots(engine, pv) == expected_slots(shadow, n)
                checked += 1
    assert checked > 0
    assert engine.refresh_count == 0


@pytest.mark.slow
def test_auto_refresh_over_a_thousand_long_sequences(desk16):
    engine = desk16.engine()
    rng = np.random.default_rng(99)
    for _ in range(1000):
        pv, shadow = run_shadow(engine, rng, 30, 8)
        assert slots(engine, pv) == expected_slots(shadow, 8)
        engine.trace.reset()
    assert engine.refresh_count > 0


def test_refresh_required_without_auto_refresh(desk16):
    engine = desk16.engine(auto_refresh=False)
    pv = engine.pack_group([1, 2, 3])
    with pytest.raises(RefreshRequiredError):
        for _ in range(20):
            pv = engine.insert_at(pv, 0, 5)
            pv = engine.delete_at(pv, 0, 5)


def test_refresh_required_without_secret_key(desk16):
    engine = desk16.engine(secret_key=None)
    pv = engine.pack_group([1, 2, 3])
    with pytest.raises(RefreshRequiredError):
        for _ in range(20):
            pv = engine.insert_at(pv, 0, 5)
            pv = engine.delete_at(pv, 0, 5)


def test_refresh_floor_none_disables_the_check(desk16):
    engine = desk16.engine(refresh_floor_bits=None)
    pv = engine.pack_group([1, 2, 3])
    pv = engine.insert_at(pv, 0, 5)
    assert engine.refresh_count == 0
    assert slots(engine, pv)[:4] == [5, 1, 2, 3]


# ------------------------------------------------------------------ masks and trace

def test_slot_masks_for_insert():
    masks = SlotMask.for_insert(8, 3, 1, 15, T)
    assert list(masks.keep) == [1, 0, 0, 0, 0, 0, 0, 1]
    assert list(masks.suffix) == [0, 1, 1, 0, 0, 0, 0, 0]
    assert list(masks.value) == [0, 15, 0, 0, 0, 0, 0, 15]
    assert list(masks.zeroing) == [1] * 8


def test_slot_masks_for_delete():
    masks = SlotMask.for_delete(8, 4, 0, 10, T)
    assert list(masks.keep) == [0, 0, 0, 0, 0, 0, 0, 1]
    assert list(masks.suffix) == [0, 1, 1, 1, 0, 0, 0, 0]
    assert list(masks.value) == [0, 0, 0, 0, 0, 0, 0, 10]
    assert list(masks.zeroing) == [1, 1, 1, 0, 1, 1, 1, 1]


def test_slot_masks_reject_overlap_and_aux_in_suffix():
    ones = np.ones(8, dtype=np.int64)
    zeros = np.zeros(8, dtype=np.int64)
    with pytest.raises(ParameterError):
        SlotMask(ones, ones, zeros, ones)
    with pytest.raises(ParameterError):
        SlotMask(zeros, ones, zeros, ones)


def test_op_trace():
    trace = OpTrace()
    trace.record("rotate")
    mark = trace.mark()
    trace.record(Op.ADD)
    trace.record(Op.ROTATE)
    assert trace.rotations() == 2
    assert trace.rotations(mark) == 1
    assert trace.since(mark) == [Op.ADD, Op.ROTATE]
    trace.truncate(mark)
    assert len(trace) == 1
    assert trace.rotations() == 1
    trace.reset()
    assert len(trace) == 0
