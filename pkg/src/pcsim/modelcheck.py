"""Exhaustive interleaving check of the PBC / PI-buffer / drain-ack protocol.

The model keeps the real :class:`~pcsim.switch.Pbc`, :class:`PersistBuffer`
and :class:`PiBuffer` and abstracts time away: at each step any enabled
action may fire.

* ``arrive``  - the next host write enters the PI buffer (if it has room);
* ``service`` - the PBC services the PI front (unless stalled on a request);
* ``pm``      - PM completes one in-flight drain and emits its ack;
* ``ack``     - an in-flight ack reaches the switch and enters the PI buffer
  (without ack priority it competes for the same bounded request slots).

A state with no enabled action while a write is still undelivered or queued
is a deadlock.
"""

from __future__ import annotations

import copy
import itertools
from collections import deque
from dataclasses import dataclass, field

from .packets import DataVersion, Kind, mem_write, write_ack
from .persist_buffer import PersistBuffer, Scheme
from .switch import Pbc, PiBuffer

PM_BASE = 0x8000_0000


@dataclass
class _Model:
    pbc: Pbc
    pi: PiBuffer
    writes: tuple
    next_write: int = 0
    stalled: bool = False
    drains: tuple = ()
    acks: tuple = ()

    def key(self) -> tuple:
        pb = self.pbc.pb
        entries = tuple((e.state.value, e.tag, e.data.version if e.data else 0, e.lru_counter) for e in pb.entries)
        pi = tuple((p.kind.value, p.tag, p.data.version if p.data else 0) for p in self.pi.snapshot())
        return (entries, pi, self.next_write, self.stalled,
                tuple(sorted((p.tag, p.data.version) for p in self.drains)),
                tuple(sorted(p.tag for p in self.acks)))

    @property
    def finished(self) -> bool:
        return self.next_write == len(self.writes) and not self.pi.requests

    def actions(self) -> list:
        acts = []
        if self.next_write < len(self.writes) and self.pi.has_room(self.writes[self.next_write]):
            acts.append(("arrive", None))
        front = self.pi.front()
        if front is not None and not (self.stalled and front.kind is not Kind.WRITE_ACK):
            acts.append(("service", None))
        acts.extend(("pm", i) for i in range(len(self.drains)))
        acts.extend(("ack", i) for i, a in enumerate(self.acks) if self.pi.has_room(a))
        return acts

    def apply(self, action) -> None:
        kind, i = action
        if kind == "arrive":
            self.pi.push(self.writes[self.next_write])
            self.next_write += 1
        elif kind == "service":
            packet = self.pi.front()
            res = self.pbc.service(packet)
            if res.stalled:
                self.stalled = True
            else:
                self.pi.pop()
                if packet.kind is Kind.WRITE_ACK:
                    self.stalled = False
            self.drains += tuple(p for _, p in res.outputs if p.kind is Kind.MEM_WRITE)
        elif kind == "pm":
            packet = self.drains[i]
            self.drains = self.drains[:i] + self.drains[i + 1:]
            self.acks += (write_ack(packet),)
        else:
            packet = self.acks[i]
            self.acks = self.acks[:i] + self.acks[i + 1:]
            self.pi.push(packet)


@dataclass
class CheckResult:
    scheme: Scheme
    ack_priority: bool
    states: int = 0
    transitions: int = 0
    deadlocks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.deadlocks


def _initial(tags, scheme: Scheme, entries: int, pi_depth: int, ack_priority: bool) -> _Model:
    versions: dict = {}
    writes = []
    for rid, tag in enumerate(tags, 1):
        versions[tag] = versions.get(tag, 0) + 1
        writes.append(mem_write(0, 1, rid, DataVersion(PM_BASE + 64 * tag, versions[tag])))
    pb = PersistBuffer(length=entries, scheme=scheme)
    return _Model(Pbc(pb), PiBuffer(pi_depth, ack_priority), tuple(writes))


def explore(tags, scheme: Scheme = Scheme.PB, entries: int = 2, pi_depth: int = 2,
            ack_priority: bool = True, max_states: int = 1_000_000) -> CheckResult:
    """Breadth-first search over every interleaving for one write sequence."""
    result = CheckResult(scheme, ack_priority)
    start = _initial(tags, scheme, entries, pi_depth, ack_priority)
    seen = {start.key(): None}
    queue = deque([(start, ())])
    while queue:
        model, path = queue.popleft()
        acts = model.actions()
        if not acts and not model.finished:
            result.deadlocks.append((tuple(tags), path, model.key()))
            continue
        for act in acts:
            nxt = copy.deepcopy(model)
            nxt.apply(act)
            result.transitions += 1
            k = nxt.key()
            if k in seen:
                continue
            seen[k] = None
            if len(seen) > max_states:
                raise RuntimeError("state space exceeds max_states")
            queue.append((nxt, path + (act[0],)))
    result.states = len(seen)
    return result


def check_all(scheme: Scheme = Scheme.PB, entries: int = 2, writes: int = 3, distinct_tags: int = 3,
              ack_priority: bool = True, pi_depth: int = 2) -> CheckResult:
    """Explore every assignment of ``writes`` writes to ``distinct_tags`` lines."""
    total = CheckResult(scheme, ack_priority)
    for tags in itertools.product(range(distinct_tags), repeat=writes):
        r = explore(tags, scheme, entries, pi_depth, ack_priority)
        total.states += r.states
        total.transitions += r.transitions
        total.deadlocks.extend(r.deadlocks)
    return total
