"""Reference model for the persistence correctness criteria, plus crash recovery.

The oracle watches three streams as they happen: versions the host sends
toward memory, acks delivered to host threads, and values returned to loads.
It flags

* read-after-ack staleness: a load issued after some version ``v`` of its
  line was acknowledged to any thread returns something older than ``v``;
* write-order breaks: PM applies ``v`` while already holding ``v' > v``;
* unsound acks: a thread is told ``v`` is durable while no persistent
  structure holds ``v`` or newer.

After a crash, :func:`recover` rebuilds PM from the surviving persist buffers
and :func:`verify_durability` checks that nothing acknowledged was lost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional


class OracleViolation(AssertionError):
    def __init__(self, violation: "Violation"):
        super().__init__(str(violation))
        self.violation = violation


@dataclass(frozen=True)
class Violation:
    kind: str
    address: int
    expected: int
    observed: int
    time: int
    detail: str = ""

    def __str__(self) -> str:
        return (f"{self.kind} at t={self.time} ps, address {self.address:#x}: "
                f"expected >= v{self.expected}, observed v{self.observed}. {self.detail}").strip()

    def as_record(self) -> dict:
        return {"kind": self.kind, "address": hex(self.address), "expected": self.expected,
                "observed": self.observed, "time_ps": self.time, "detail": self.detail}


class Oracle:
    def __init__(self, strict: bool = True):
        self.strict = strict
        self.history: dict[int, list] = {}
        self.latest_acked: dict[int, int] = {}
        self.thread_acked: dict[tuple, int] = {}
        self.issued: dict[int, int] = {}
        self.pm_applied: dict[int, int] = {}
        self.violations: list[Violation] = []
        self._read_floor: dict[int, int] = {}
        self.persistent_view: Optional[Callable[[int], int]] = None
        self.acks = 0
        self.reads = 0

    def _fail(self, v: Violation) -> None:
        self.violations.append(v)
        if self.strict:
            raise OracleViolation(v)

    # -- observation hooks ------------------------------------------------
    def record_issue(self, address: int, version: int) -> None:
        prev = self.issued.get(address, 0)
        if version <= prev:
            self._fail(Violation("issue-order", address, prev + 1, version, -1, "host issued a non-increasing version"))
        self.issued[address] = version

    def record_ack(self, address: int, version: int, time: int, thread: int = 0) -> None:
        self.acks += 1
        hist = self.history.setdefault(address, [])
        if hist and version <= hist[-1][0]:
            self._fail(Violation("write-order", address, hist[-1][0] + 1, version, time,
                                 "acks for one line must arrive in version order"))
        hist.append((version, time))
        if self.persistent_view is not None:
            held = self.persistent_view(address)
            if held < version:
                self._fail(Violation("unsound-ack", address, version, held, time,
                                     "acked version not held by any persistent structure"))
        if version > self.latest_acked.get(address, 0):
            self.latest_acked[address] = version
        key = (thread, address)
        if version > self.thread_acked.get(key, 0):
            self.thread_acked[key] = version

    def note_read_issue(self, request_id: int, address: int) -> None:
        self._read_floor[request_id] = self.latest_acked.get(address, 0)

    def record_read(self, address: int, version: int, time: int, thread: int = 0,
                    request_id: Optional[int] = None) -> None:
        self.reads += 1
        floor = self.thread_acked.get((thread, address), 0)
        if request_id is not None:
            floor = max(floor, self._read_floor.pop(request_id, 0))
        if version < floor:
            self._fail(Violation("write-read-order", address, floor, version, time,
                                 f"thread {thread} read a version older than one already acknowledged"))
        if version > self.issued.get(address, 0):
            self._fail(Violation("fabricated-read", address, self.issued.get(address, 0), version, time,
                                 "read returned a version never sent to memory"))

    def on_pm_apply(self, address: int, version: int, time: int) -> None:
        held = self.pm_applied.get(address, 0)
        if version < held:
            self._fail(Violation("write-order", address, held, version, time,
                                 "PM applied an older version over a newer one"))
        self.pm_applied[address] = max(held, version)


@dataclass(frozen=True)
class CrashPlan:
    """When to crash: after N dispatched events, at a time, or at the trace's crash marker."""

    after_events: Optional[int] = None
    at_time: Optional[int] = None
    on_marker: bool = True


@dataclass
class CrashState:
    """What survives a crash.

    ``buffers`` lists the resident entries of each persistent switch, ordered
    from the host side (index 0) toward PM.  Packets in links, pipelines and
    PI/PO buffers are gone.
    """

    time: int
    events: int
    pm: dict
    buffers: list = field(default_factory=list)
    latest_acked: dict = field(default_factory=dict)
    issued: dict = field(default_factory=dict)


def inject_crash(system, plan: CrashPlan) -> CrashState:
    """Run ``system`` until ``plan`` fires, then keep only persistent state."""
    return system.run_to_crash(plan)


def recover(state: CrashState) -> dict[int, int]:
    """Write every resident buffer entry back to PM.

    Entries are written from the switch nearest PM toward the host so the
    newest copy of a line (held nearest the host) lands last.
    """
    pm = dict(state.pm)
    for entries in reversed(state.buffers):
        for tag, data, _state in entries:
            pm[data.address] = data.version
    return pm


@dataclass
class Verdict:
    ok: bool
    counterexamples: list = field(default_factory=list)
    time: int = 0
    events: int = 0

    def as_record(self) -> dict:
        return {"ok": self.ok, "time_ps": self.time, "events": self.events,
                "counterexamples": [
                    {"address": hex(a), "acked": ack, "recovered": rec, "problem": why}
                    for a, ack, rec, why in self.counterexamples]}


def verify_durability(oracle, recovered: dict) -> Verdict:
    """Every acknowledged version survives; nothing newer than what was sent appears.

    ``oracle`` is an :class:`Oracle` or a :class:`CrashState` (anything with
    ``latest_acked`` and ``issued`` maps).  Counterexamples are sorted, so the
    first one is the lowest failing address.
    """
    acked, issued = oracle.latest_acked, oracle.issued
    bad = []
    for address in sorted(acked):
        got = recovered.get(address, 0)
        if got < acked[address]:
            bad.append((address, acked[address], got, "lost"))
    for address in sorted(recovered):
        if recovered[address] > issued.get(address, 0):
            bad.append((address, acked.get(address, 0), recovered[address], "fabricated"))
    bad.sort()
    return Verdict(not bad, bad)


def check_crash(state: CrashState) -> Verdict:
    v = verify_durability(state, recover(state))
    v.time, v.events = state.time, state.events
    return v
