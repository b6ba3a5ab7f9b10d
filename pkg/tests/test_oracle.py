from dataclasses import replace

import pytest

from pcsim.config import ExperimentConfig, Topology
from pcsim.fabric import System
from pcsim.oracle import (CrashPlan, CrashState, Oracle, OracleViolation, check_crash, inject_crash, recover,
                          verify_durability)
from pcsim.packets import DataVersion, tag_of
from pcsim.persist_buffer import Scheme
from pcsim.traces import Op, TraceOp, TraceSpec, generate_trace

PM = 0x8000_0000
A = PM + 0x40


def test_ack_then_read_same_version_passes():
    o = Oracle()
    o.record_issue(A, 1)
    o.record_ack(A, 1, 10)
    o.record_read(A, 1, 20)


def test_read_older_than_acked_is_violation():
    o = Oracle()
    o.record_issue(A, 1)
    o.record_issue(A, 2)
    o.record_ack(A, 2, 10)
    with pytest.raises(OracleViolation) as exc:
        o.record_read(A, 1, 20)
    assert exc.value.violation.kind == "write-read-order"


def test_pm_applying_older_version_is_violation():
    o = Oracle()
    o.on_pm_apply(A, 3, 10)
    with pytest.raises(OracleViolation) as exc:
        o.on_pm_apply(A, 2, 20)
    assert exc.value.violation.kind == "write-order"


def test_read_floor_snapshotted_at_issue_covers_other_threads():
    o = Oracle()
    o.record_issue(A, 1)
    o.record_ack(A, 1, 5, thread=0)
    o.note_read_issue(77, A)
    with pytest.raises(OracleViolation):
        o.record_read(A, 0, 9, thread=3, request_id=77)


def test_non_strict_mode_collects():
    o = Oracle(strict=False)
    o.on_pm_apply(A, 3, 1)
    o.on_pm_apply(A, 1, 2)
    assert [v.kind for v in o.violations] == ["write-order"]
    assert o.violations[0].as_record()["address"] == hex(A)


def test_unsound_ack_detected_through_persistent_view():
    o = Oracle()
    o.persistent_view = lambda a: 0
    o.record_issue(A, 1)
    with pytest.raises(OracleViolation) as exc:
        o.record_ack(A, 1, 3)
    assert exc.value.violation.kind == "unsound-ack"


# -- recovery --------------------------------------------------------------------

def entry(addr, version, state="Drain"):
    return (tag_of(addr), DataVersion(addr, version), state)


def test_recover_writes_back_drain_entry():
    s = CrashState(0, 0, pm={A: 1}, buffers=[[entry(A, 2)]])
    assert recover(s) == {A: 2}


def test_recover_all_empty_keeps_pm():
    s = CrashState(0, 0, pm={A: 1, PM: 4}, buffers=[[], []])
    assert recover(s) == {A: 1, PM: 4}


def test_recover_upstream_newest_wins():
    s = CrashState(0, 0, pm={A: 1}, buffers=[[entry(A, 3, "Dirty")], [entry(A, 2)]])
    assert recover(s) == {A: 3}


def test_verify_durability_cases():
    s = CrashState(0, 0, pm={}, latest_acked={A: 2}, issued={A: 3})
    assert verify_durability(s, {A: 2}).ok
    bad = verify_durability(s, {A: 1})
    assert not bad.ok and bad.counterexamples[0] == (A, 2, 1, "lost")
    assert verify_durability(s, {A: 3}).ok
    assert not verify_durability(s, {A: 4}).ok


def test_counterexample_is_lowest_address_first():
    s = CrashState(0, 0, pm={}, latest_acked={A + 64: 1, A: 1}, issued={A: 1, A + 64: 1})
    assert verify_durability(s, {}).counterexamples[0][0] == A


# -- crash injection ----------------------------------------------------------------

def system(scheme, trace, n=1, persistent="first"):
    cfg = replace(ExperimentConfig(), topology=Topology(n, persistent))
    return System(cfg, scheme, trace, strict=True)


PERSIST = [TraceOp(Op.STORE, A, 0), TraceOp(Op.FLUSH, A, 0), TraceOp(Op.FENCE, 0, 0)]


def test_crash_with_empty_fabric_changes_nothing():
    state = inject_crash(system(Scheme.PB, [TraceOp(Op.FENCE, 0, 0)]), CrashPlan(at_time=0))
    assert state.pm == {} and state.buffers == [[]]
    assert check_crash(state).ok


def test_crash_with_write_in_link_loses_it_without_obligation():
    # the write is on the host->switch link at t=1ns
    state = inject_crash(system(Scheme.NOPB, PERSIST), CrashPlan(at_time=1_000))
    assert state.pm == {} and state.latest_acked == {} and state.issued == {A: 1}
    assert check_crash(state).ok


def test_crash_with_drain_in_flight_keeps_pb_copy():
    # PB acked at ~222 ns; the drain is travelling to PM until ~340 ns
    state = inject_crash(system(Scheme.PB, PERSIST), CrashPlan(at_time=300_000))
    assert state.latest_acked == {A: 1}
    assert state.pm == {}
    assert [(d.version, s) for _, d, s in state.buffers[0]] == [(1, "Drain")]
    assert recover(state) == {A: 1}
    assert check_crash(state).ok


def test_crash_marker_stops_run():
    trace = PERSIST + [TraceOp(Op.CRASH, 0, 0)] + PERSIST
    state = inject_crash(system(Scheme.PB, trace), CrashPlan())
    assert state.issued == {A: 1}


def test_recovered_pm_never_below_precrash_pm():
    trace = generate_trace(TraceSpec.parse("hotset:ops=300"), 2)
    for k in range(50, 2000, 97):
        state = inject_crash(system(Scheme.PB_RF, trace), CrashPlan(after_events=k))
        rec = recover(state)
        assert all(rec[a] >= v for a, v in state.pm.items())


@pytest.mark.parametrize("scheme", list(Scheme))
def test_sweep_in_place_matches_rerun(scheme):
    trace = generate_trace(TraceSpec.parse("hotset:ops=200"), 6)
    sweep_states = {}
    sysm = system(scheme, trace)
    points = {13, 250, 777, 1500}
    sysm.engine.post_dispatch = lambda k: sweep_states.__setitem__(k, sysm.crash_state()) if k in points else None
    sysm._start()
    sysm.engine.run_until(max_events=max(points))
    for k in points:
        rerun = inject_crash(system(scheme, trace), CrashPlan(after_events=k))
        assert rerun == sweep_states[k]


@pytest.mark.parametrize("scheme", list(Scheme))
def test_multi_switch_crash_sweep(scheme):
    trace = generate_trace(TraceSpec.parse("hotset:ops=150"), 8)
    res = system(scheme, trace, n=2, persistent="all").crash_sweep(3000)
    assert res.ok, res.failures[:1]


@pytest.mark.parametrize("scheme", list(Scheme))
def test_final_pm_equals_latest_issued(scheme):
    trace = generate_trace(TraceSpec.parse("uniform:ops=400"), 12)
    sysm = system(scheme, trace)
    sysm.run()
    assert sysm.pm.snapshot() == sysm.oracle.issued
