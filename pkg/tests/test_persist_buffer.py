import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcsim.packets import DataVersion, Header, Kind, tag_of
from pcsim.persist_buffer import (LEGAL, Outcome, PbeState, PersistBuffer, PersistBufferError, Scheme,
                                  fraction_count)

BASE = 0x8000_0000
HDR = Header(0, 1, 1, Kind.MEM_WRITE)


def line(i):
    return BASE + 64 * i


def put(pb, i, version=1):
    return pb.insert(tag_of(line(i)), DataVersion(line(i), version), HDR)


def test_lookup_empty_buffer():
    assert PersistBuffer().lookup(0x40) is None


def test_insert_then_lookup_is_dirty():
    pb = PersistBuffer()
    res = pb.insert(0x40, DataVersion(0x1000, 1), HDR)
    assert res.outcome is Outcome.INSERTED
    assert pb.lookup(0x40) == (res.index, PbeState.DIRTY)


def test_insert_drain_ack_walk_leaves_entry_empty():
    pb = PersistBuffer()
    idx = pb.insert(0x40, DataVersion(0x1000, 1), HDR).index
    pkt = pb.issue_drain(idx)
    assert pkt.kind is Kind.MEM_WRITE and pkt.address == 0x1000 and pkt.data.version == 1
    assert pb.lookup(0x40) == (idx, PbeState.DRAIN)
    assert pb.apply_ack(0x40) == idx
    assert pb.lookup(0x40) is None
    assert pb.entries[idx].state is PbeState.EMPTY


def test_first_insert_takes_oldest_empty():
    pb = PersistBuffer()
    assert put(pb, 0).index == 0
    assert put(pb, 1).index == 1


def test_full_of_dirty_needs_victim_lru():
    pb = PersistBuffer(scheme=Scheme.PB_RF)
    for i in range(16):
        put(pb, i)
    # refresh line 0 so line 1 becomes the oldest Dirty entry
    pb.forward(pb.lookup(tag_of(line(0)))[0])
    res = put(pb, 99)
    assert res.outcome is Outcome.NEEDS_VICTIM
    assert res.index == pb.lookup(tag_of(line(1)))[0]


def test_all_drain_must_stall():
    pb = PersistBuffer()
    for i in range(16):
        pb.issue_drain(put(pb, i).index)
    assert put(pb, 99).outcome is Outcome.MUST_STALL


def test_coalesce_keeps_dirty_and_raises_version():
    pb = PersistBuffer(scheme=Scheme.PB_RF)
    idx = put(pb, 0, 3).index
    pb.coalesce(idx, DataVersion(line(0), 4))
    e = pb.entries[idx]
    assert e.state is PbeState.DIRTY and e.data.version == 4
    assert pb.coalesce_count == 1


def test_coalesce_same_version_rejected():
    pb = PersistBuffer(scheme=Scheme.PB_RF)
    idx = put(pb, 0, 3).index
    with pytest.raises(PersistBufferError):
        pb.coalesce(idx, DataVersion(line(0), 3))


def test_coalesce_onto_drain_rejected():
    pb = PersistBuffer(scheme=Scheme.PB_RF)
    idx = put(pb, 0, 1).index
    pb.issue_drain(idx)
    with pytest.raises(PersistBufferError):
        pb.coalesce(idx, DataVersion(line(0), 2))


def test_hot_line_under_rf_coalesces_into_one_entry():
    pb = PersistBuffer(scheme=Scheme.PB_RF)
    outcomes = [put(pb, 7, v).outcome for v in range(1, 101)]
    assert outcomes.count(Outcome.INSERTED) == 1
    assert outcomes.count(Outcome.COALESCED) == 99


def test_same_tag_insert_rejected_under_pb():
    pb = PersistBuffer(scheme=Scheme.PB)
    put(pb, 0, 1)
    with pytest.raises(PersistBufferError):
        put(pb, 0, 2)


def test_drain_of_non_dirty_is_error():
    pb = PersistBuffer()
    idx = put(pb, 0).index
    pb.issue_drain(idx)
    with pytest.raises(PersistBufferError):
        pb.issue_drain(idx)
    with pytest.raises(PersistBufferError):
        pb.issue_drain(5)


def test_two_drains_give_distinct_packets():
    pb = PersistBuffer()
    a, b = put(pb, 0).index, put(pb, 1).index
    pa, pb_ = pb.issue_drain(a), pb.issue_drain(b)
    assert pa.address != pb_.address
    assert pb.drain_count_now == 2


def test_ack_without_drain_entry_is_error():
    with pytest.raises(PersistBufferError):
        PersistBuffer().apply_ack(0x99)


def test_reinsert_after_ack_is_legal():
    pb = PersistBuffer()
    idx = put(pb, 0, 1).index
    pb.issue_drain(idx)
    pb.apply_ack(tag_of(line(0)))
    res = put(pb, 0, 2)
    assert res.outcome is Outcome.INSERTED
    assert pb.lookup(tag_of(line(0)))[1] is PbeState.DIRTY


@pytest.mark.parametrize("length, dirty, expected", [
    (16, 13, 3),
    (16, 12, 0),
    (16, 5, 0),
    (4, 4, 1),
])
def test_rf_drain_policy_counts(length, dirty, expected):
    pb = PersistBuffer(length=length, scheme=Scheme.PB_RF)
    for i in range(dirty):
        put(pb, i)
    assert len(pb.rf_drain_policy()) == expected


def test_rf_policy_drains_oldest_first():
    pb = PersistBuffer(scheme=Scheme.PB_RF)
    for i in range(13):
        put(pb, i)
    chosen = pb.rf_drain_policy()
    assert [pb.entries[i].tag for i in chosen] == [tag_of(line(i)) for i in range(3)]


def test_threshold_arithmetic_uses_ceiling():
    assert fraction_count(0.8, 16) == 13
    assert fraction_count(0.6, 16) == 10
    assert fraction_count(0.6, 4) == 3
    assert fraction_count(0.8, 5) == 4


def test_rf_policy_only_for_rf():
    with pytest.raises(PersistBufferError):
        PersistBuffer(scheme=Scheme.PB).rf_drain_policy()


def test_counter_width_is_four_bits_for_sixteen_entries():
    assert PersistBuffer().counter_bits == 4
    pb = PersistBuffer()
    for i in range(40):
        if pb.empty_count == 0:
            victim = pb._oldest(PbeState.DIRTY)
            pb.issue_drain(victim)
            pb.apply_ack(pb.entries[victim].tag)
        put(pb, i)
        assert sorted(e.lru_counter for e in pb.entries) == list(range(16))


# -- randomized comparison against a brute-force recency list ----------------

OPS = st.lists(st.tuples(st.sampled_from(["insert", "drain", "ack", "forward", "coalesce"]),
                         st.integers(0, 11)), max_size=120)


@settings(max_examples=200, deadline=None)
@given(length=st.integers(1, 8), ops=OPS, rf=st.booleans())
def test_against_brute_force_recency_model(length, ops, rf):
    log = []
    scheme = Scheme.PB_RF if rf else Scheme.PB
    pb = PersistBuffer(length=length, scheme=scheme, on_transition=lambda i, o, n, t: log.append((i, o, n)))
    recency = list(range(length))           # oldest first
    state = {i: PbeState.EMPTY for i in range(length)}
    version = {}

    def use(i):
        recency.remove(i)
        recency.append(i)

    for op, k in ops:
        if op == "insert":
            tag = tag_of(line(k))
            hit = pb.lookup(tag)
            version[k] = version.get(k, 0) + 1
            if hit is not None:
                if rf and hit[1] is PbeState.DIRTY:
                    res = put(pb, k, version[k])
                    assert res.outcome is Outcome.COALESCED and res.index == hit[0]
                    use(hit[0])
                continue
            res = put(pb, k, version[k])
            empties = [i for i in recency if state[i] is PbeState.EMPTY]
            dirties = [i for i in recency if state[i] is PbeState.DIRTY]
            if empties:
                assert res.outcome is Outcome.INSERTED and res.index == empties[0]
                state[res.index] = PbeState.DIRTY
                use(res.index)
            elif dirties:
                assert res.outcome is Outcome.NEEDS_VICTIM and res.index == dirties[0]
            else:
                assert res.outcome is Outcome.MUST_STALL
        elif op == "drain":
            dirties = [i for i in range(length) if state[i] is PbeState.DIRTY]
            if dirties:
                i = dirties[k % len(dirties)]
                pb.issue_drain(i)
                state[i] = PbeState.DRAIN
        elif op == "ack":
            drains = [i for i in range(length) if state[i] is PbeState.DRAIN]
            if drains:
                i = drains[k % len(drains)]
                pb.apply_ack(pb.entries[i].tag)
                state[i] = PbeState.EMPTY
        elif op == "forward":
            live = [i for i in range(length) if state[i] is not PbeState.EMPTY]
            if live:
                i = live[k % len(live)]
                pb.forward(i)
                use(i)
        elif op == "coalesce" and rf:
            dirties = [i for i in range(length) if state[i] is PbeState.DIRTY]
            if dirties:
                i = dirties[k % len(dirties)]
                a = pb.entries[i].data.address
                version[(a - BASE) // 64] += 1
                pb.coalesce(i, DataVersion(a, version[(a - BASE) // 64]))
                use(i)
        # invariants after every step
        assert [e.state for e in pb.entries] == [state[i] for i in range(length)]
        assert pb.dirty_count + pb.drain_count_now + pb.empty_count == length
        tags = [e.tag for e in pb.entries if e.state is not PbeState.EMPTY]
        assert len(tags) == len(set(tags))
        assert pb.lru_order(PbeState.DIRTY) == [i for i in recency if state[i] is PbeState.DIRTY]

    assert all((o, n) in LEGAL for _, o, n in log)
    # per-entry history matches Empty (Dirty Dirty* Drain Empty)*
    for i in range(length):
        word = "".join({"Empty": "E", "Dirty": "D", "Drain": "R"}[n.value] for j, o, n in log if j == i)
        assert re.fullmatch(r"(D+RE)*(D+R?)?", word), word
