"""Abstract multi-threaded host that replays a trace.

There is no cache model: a store only bumps the line's version, and the line
reaches the fabric when it is flushed.  Loads block their thread until the
response arrives; a fence blocks until every flush the thread issued since
its last fence has been acknowledged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .devices import HOST_ID, PM_ID, AddressRange, DramDevice
from .oracle import Oracle
from .packets import DataVersion, Kind, Packet, RequestIds, mem_read, mem_write
from .sim_core import Engine, SimulationError
from .traces import Op, TraceOp


@dataclass
class ThreadState:
    tid: int
    ops: list
    pc: int = 0
    outstanding: set = field(default_factory=set)
    fencing: bool = False
    persist_start: Optional[int] = None
    fence_issue: int = 0
    flush_version: int = 0
    done: bool = False
    finish_time: int = 0


@dataclass
class OpRecord:
    """A completed op.  For flushes ``version`` is the line version it covers."""

    thread: int
    kind: str
    address: int
    issue: int
    complete: int
    version: int = 0


class Host:
    def __init__(self, engine: Engine, pm_range: AddressRange, dram: DramDevice = DramDevice(),
                 oracle: Optional[Oracle] = None, op_gap_ps: int = 250, name: str = "host",
                 record_ops: bool = False):
        self.engine = engine
        self.pm_range = pm_range
        self.dram = dram
        self.oracle = oracle
        self.op_gap_ps = op_gap_ps
        self.name = name
        self.port = None
        self.ids = RequestIds()
        self.threads: list[ThreadState] = []
        self.line_version: dict[int, int] = {}
        self.flushed_version: dict[int, int] = {}
        self.inflight: dict[int, int] = {}
        self._requests: dict[int, tuple] = {}
        self._waiters: dict[int, list] = {}
        self.persist_latencies: list[int] = []
        self.read_latencies: list[int] = []
        self.flushes = 0
        self.ops_done = 0
        self.finish_time = 0
        self.log: Optional[list] = [] if record_ops else None
        self.on_crash_marker: Optional[Callable[[], None]] = None
        self.on_finished: Optional[Callable[[], None]] = None
        engine.register(name, self)

    def connect(self, channel) -> None:
        self.port = channel

    def load(self, trace: list[TraceOp]) -> None:
        by_thread: dict[int, list] = {}
        for op in trace:
            by_thread.setdefault(op.thread, []).append(op)
        self.threads = [ThreadState(t, by_thread[t]) for t in sorted(by_thread)]

    def start(self) -> None:
        for th in self.threads:
            self.engine.at(0, self._step, th, target=self.name)
        if not self.threads and self.on_finished:
            self.on_finished()

    @property
    def finished(self) -> bool:
        return all(th.done for th in self.threads)

    # -- op execution -----------------------------------------------------
    def _step(self, th: ThreadState) -> None:
        if th.pc >= len(th.ops):
            th.done = True
            th.finish_time = self.engine.now
            self.finish_time = max(self.finish_time, self.engine.now)
            if self.finished and self.on_finished:
                self.on_finished()
            return
        op = th.ops[th.pc]
        now = self.engine.now
        pm = op.address in self.pm_range
        kind = op.kind
        if kind is Op.LOAD:
            if pm:
                rid = self.ids.next()
                self._requests[rid] = ("load", th, op.address, now)
                if self.oracle:
                    self.oracle.note_read_issue(rid, op.address)
                self.port.send(mem_read(HOST_ID, PM_ID, rid, op.address, now))
            else:
                self.engine.after(self.dram.latency_ps, self._complete, th, now, target=self.name)
            return
        if kind is Op.STORE:
            if pm:
                self.line_version[op.address] = self.line_version.get(op.address, 0) + 1
        elif kind is Op.FLUSH:
            if pm:
                self._flush(th, op.address, now)
        elif kind is Op.FENCE:
            if th.outstanding:
                th.fencing = True
                th.fence_issue = now
                return
            self._retire_fence(th, now)
        elif kind is Op.CRASH:
            if self.on_crash_marker:
                self.on_crash_marker()
                return
        self._complete(th, now)

    def _flush(self, th: ThreadState, address: int, now: int) -> None:
        version = self.line_version.get(address, 0)
        th.flush_version = version
        if th.persist_start is None:
            th.persist_start = now
        if version > self.flushed_version.get(address, 0):
            rid = self.ids.next()
            self.flushed_version[address] = version
            self.inflight[address] = rid
            self._requests[rid] = ("flush", th, address, now, version)
            self._waiters[rid] = [th]
            th.outstanding.add(rid)
            self.flushes += 1
            if self.oracle:
                self.oracle.record_issue(address, version)
            self.port.send(mem_write(HOST_ID, PM_ID, rid, DataVersion(address, version, th.tid), now))
        elif address in self.inflight:
            # line is clean but its write-back is still in flight: the fence waits for it
            rid = self.inflight[address]
            self._waiters[rid].append(th)
            th.outstanding.add(rid)

    def _retire_fence(self, th: ThreadState, issue: int) -> None:
        now = self.engine.now
        if th.persist_start is not None:
            self.persist_latencies.append(now - th.persist_start)
            th.persist_start = None

    def _complete(self, th: ThreadState, issue: int) -> None:
        now = self.engine.now
        op = th.ops[th.pc]
        if self.log is not None:
            version = th.flush_version if op.kind is Op.FLUSH else 0
            self.log.append(OpRecord(th.tid, op.kind.value, op.address, issue, now, version))
        th.pc += 1
        self.ops_done += 1
        self.engine.progress()
        self.engine.after(self.op_gap_ps, self._step, th, target=self.name)

    # -- responses --------------------------------------------------------
    def receive(self, packet: Packet, port: str = "") -> None:
        rid = packet.header.request_id
        req = self._requests.pop(rid, None)
        if req is None:
            raise SimulationError(f"host: unexpected {packet.kind.value} for request {rid} "
                                  f"(duplicate or misrouted)")
        now = self.engine.now
        if packet.kind is Kind.WRITE_ACK:
            if req[0] != "flush":
                raise SimulationError(f"host: write ack for a {req[0]} request")
            _, owner, address, issued, version = req
            if self.inflight.get(address) == rid:
                del self.inflight[address]
            if self.oracle:
                self.oracle.record_ack(address, version, now, owner.tid)
            for th in self._waiters.pop(rid):
                th.outstanding.discard(rid)
                if th.fencing and not th.outstanding:
                    th.fencing = False
                    self._retire_fence(th, th.fence_issue)
                    self._complete(th, th.fence_issue)
        elif packet.kind is Kind.READ_RESPONSE:
            if req[0] != "load":
                raise SimulationError(f"host: read response for a {req[0]} request")
            _, th, address, issued = req
            self.read_latencies.append(now - issued)
            if self.oracle:
                self.oracle.record_read(address, packet.data.version, now, th.tid, rid)
            self._complete(th, issued)
        else:
            raise SimulationError(f"host: unexpected {packet.kind.value}")
