"""Four-stage CXL switch with an optional persist buffer.

The switch pipeline is modelled as a fixed latency per stage with no
internal contention.  Packets the selector (PBCS) captures leave the
routing path at the switch-allocation stage and queue in the PI buffer,
where the persist buffer controller (PBC) services them one at a time.
PBC output goes through the PO buffer and back into the routing fabric.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .packets import Kind, LinkConfig, Packet, read_response, serialization_delay, write_ack
from .persist_buffer import Outcome, PbeState, PersistBuffer, Scheme
from .sim_core import Engine, SimulationError

PIPELINE_STAGES = 4


@dataclass
class PbConfig:
    entries: int = 16
    drain_threshold: float = 0.80
    preset: float = 0.60
    tag_access_ps: int = 388
    data_access_ps: int = 785


@dataclass
class SwitchConfig:
    scheme: Scheme = Scheme.PB
    stage_latency_ps: int = 20_000
    pi_depth: int = 32
    po_depth: int = 32
    pbc_service_ps: int = 2_000
    pb: PbConfig = field(default_factory=PbConfig)
    ack_priority: bool = True
    # capture reads whose line has a captured write still waiting for the PBC
    pending_write_check: bool = True

    def __post_init__(self):
        if self.stage_latency_ps <= 0 or self.pbc_service_ps <= 0:
            raise ValueError("switch latencies must be positive")
        if self.pi_depth < 1 or self.po_depth < 1:
            raise ValueError("PI/PO buffer depths must be >= 1")

    @property
    def traversal_ps(self) -> int:
        return PIPELINE_STAGES * self.stage_latency_ps

    def make_pb(self, **kw) -> Optional[PersistBuffer]:
        if self.scheme is Scheme.NOPB:
            return None
        p = self.pb
        return PersistBuffer(length=p.entries, scheme=self.scheme, drain_threshold=p.drain_threshold,
                             preset=p.preset, tag_access_latency=p.tag_access_ps,
                             data_access_latency=p.data_access_ps, **kw)


class PiBuffer:
    """PBC input queue.  Write acks always leave before queued requests.

    Requests are bounded by ``depth``.  Acks never need more room than there
    are persist-buffer entries (one outstanding drain per entry), so they are
    admitted unconditionally.  With ``ack_priority=False`` the buffer is a
    single FIFO; that variant exists to show the deadlock it causes.
    """

    def __init__(self, depth: int = 32, ack_priority: bool = True):
        self.depth = depth
        self.ack_priority = ack_priority
        self.acks: deque = deque()
        self.requests: deque = deque()

    def __len__(self) -> int:
        return len(self.acks) + len(self.requests)

    def has_room(self, packet: Packet) -> bool:
        if packet.kind is Kind.WRITE_ACK and self.ack_priority:
            return True
        return len(self.requests) < self.depth

    def push(self, packet: Packet) -> None:
        if packet.kind is Kind.WRITE_ACK and self.ack_priority:
            self.acks.append(packet)
        else:
            self.requests.append(packet)

    def front(self) -> Optional[Packet]:
        if self.acks:
            return self.acks[0]
        return self.requests[0] if self.requests else None

    def pop(self) -> Packet:
        return self.acks.popleft() if self.acks else self.requests.popleft()

    def snapshot(self) -> tuple:
        return tuple(self.acks) + tuple(self.requests)


class Reason(str, Enum):
    NONE = "none"
    WRITE_TO_PM = "write_to_pm"
    ACK_FOR_DRAIN = "ack_for_drain"
    READ_HIT_DIRTY = "read_hit_dirty"
    READ_HIT_DRAIN = "read_hit_drain"
    READ_PENDING_WRITE = "read_pending_write"


@dataclass(frozen=True)
class PbcsDecision:
    capture: bool
    reason: Reason = Reason.NONE


PASS = PbcsDecision(False, Reason.NONE)


def pbcs_classify(packet: Packet, pb: Optional[PersistBuffer], is_pm: Callable[[int], bool],
                  pending: Optional[dict] = None) -> PbcsDecision:
    """Decide whether ``packet`` is diverted to the PI buffer.

    ``pending`` maps tag -> number of captured writes the PBC has not yet
    serviced; reads to such lines are captured so they queue behind the write.
    """
    if pb is None:
        return PASS
    kind = packet.kind
    if kind is Kind.MEM_WRITE:
        return PbcsDecision(True, Reason.WRITE_TO_PM) if is_pm(packet.address) else PASS
    if kind is Kind.WRITE_ACK:
        hit = pb.lookup(packet.tag)
        if hit is not None and hit[1] is PbeState.DRAIN:
            return PbcsDecision(True, Reason.ACK_FOR_DRAIN)
        return PASS
    if kind is Kind.MEM_READ and is_pm(packet.address):
        hit = pb.lookup(packet.tag)
        if hit is not None:
            if hit[1] is PbeState.DIRTY:
                return PbcsDecision(True, Reason.READ_HIT_DIRTY)
            if hit[1] is PbeState.DRAIN:
                return PbcsDecision(True, Reason.READ_HIT_DRAIN)
        if pending and pending.get(packet.tag):
            return PbcsDecision(True, Reason.READ_PENDING_WRITE)
    return PASS


@dataclass
class PbcResult:
    """Effect of one PBC service attempt.

    ``outputs`` holds ``(offset_ps, packet)`` pairs destined for the PO buffer,
    offsets measured from the start of the service slot.
    """

    consumed: bool
    stalled: bool = False
    outputs: list = field(default_factory=list)
    busy_ps: int = 0
    inserted: bool = False
    coalesced: bool = False
    forwarded: bool = False
    rerouted: bool = False
    acked_tag: Optional[int] = None


class Pbc:
    """Persist buffer controller decision logic, free of timing."""

    def __init__(self, pb: PersistBuffer, service_ps: int = 2_000):
        self.pb = pb
        self.service_ps = service_ps
        self.final_drain = False

    @property
    def scheme(self) -> Scheme:
        return self.pb.scheme

    def _drain(self, indices, t: int, outputs: list) -> int:
        cost = self.pb.tag_access_latency + self.pb.data_access_latency
        for i in indices:
            t += cost
            outputs.append((t, self.pb.issue_drain(i)))
        return t

    def _post_persist_drains(self, idx: int) -> list[int]:
        if self.final_drain:
            return self.pb.lru_order(PbeState.DIRTY)
        if self.scheme is Scheme.PB:
            return [idx]
        return self.pb.rf_drain_policy()

    def service(self, packet: Packet) -> PbcResult:
        if packet.kind is Kind.WRITE_ACK:
            return self.service_ack(packet)
        if packet.kind is Kind.MEM_WRITE:
            return self.service_write(packet)
        if packet.kind is Kind.MEM_READ:
            return self.service_read(packet)
        raise SimulationError(f"PBC cannot service {packet.kind.value}")

    def service_ack(self, packet: Packet) -> PbcResult:
        self.pb.apply_ack(packet.tag)
        return PbcResult(consumed=True, busy_ps=self.service_ps, acked_tag=packet.tag)

    def service_write(self, packet: Packet) -> PbcResult:
        pb = self.pb
        t = self.service_ps
        outputs: list = []
        hit = pb.lookup(packet.tag)
        if hit is not None and hit[1] is PbeState.DRAIN:
            # older copy still in flight downstream: wait for its ack
            return PbcResult(consumed=False, stalled=True, busy_ps=t)
        if hit is not None:
            pb.coalesce(hit[0], packet.data, packet.header)
            outputs.append((t, write_ack(packet)))
            t = self._drain(self._post_persist_drains(hit[0]), t, outputs)
            return PbcResult(consumed=True, outputs=outputs, busy_ps=t, coalesced=True)
        res = pb.insert(packet.tag, packet.data, packet.header)
        if res.outcome is Outcome.INSERTED:
            outputs.append((t, write_ack(packet)))
            t = self._drain(self._post_persist_drains(res.index), t, outputs)
            return PbcResult(consumed=True, outputs=outputs, busy_ps=t, inserted=True)
        if res.outcome is Outcome.NEEDS_VICTIM:
            t = self._drain([res.index], t, outputs)
            return PbcResult(consumed=False, stalled=True, outputs=outputs, busy_ps=t)
        return PbcResult(consumed=False, stalled=True, busy_ps=t)

    def service_read(self, packet: Packet) -> PbcResult:
        pb = self.pb
        t = self.service_ps
        if pb.scheme is Scheme.PB_RF:
            hit = pb.lookup(packet.tag)
            if hit is not None:
                data = pb.forward(hit[0])
                t += pb.data_access_latency
                return PbcResult(consumed=True, outputs=[(t, read_response(packet, data))],
                                 busy_ps=t, forwarded=True)
        # re-inject toward memory behind any drain already in the PO buffer
        return PbcResult(consumed=True, outputs=[(t, packet)], busy_ps=t, rerouted=True)

    def drain_all(self) -> PbcResult:
        outputs: list = []
        t = self._drain(self.pb.lru_order(PbeState.DIRTY), self.service_ps, outputs)
        return PbcResult(consumed=False, outputs=outputs, busy_ps=t)


@dataclass
class SwitchCounters:
    captured: dict = field(default_factory=lambda: defaultdict(int))
    pb_read_lookups: int = 0
    pb_read_hits: int = 0
    rerouted_reads: int = 0
    coalesces: int = 0
    inserts: int = 0
    drains: int = 0
    acks_consumed: int = 0
    stall_ps: int = 0
    stall_events: int = 0
    pi_max: int = 0
    po_max: int = 0
    hol_blocked: int = 0
    pb_port_wait_ps: int = 0
    pbcs_lookups: int = 0


class Switch:
    """Timed switch component.

    ``ports`` maps port name -> outgoing channel (anything with ``send``);
    ``routes`` maps destination node id -> port name.
    """

    def __init__(self, engine: Engine, name: str, node_id: int, config: SwitchConfig,
                 is_pm: Callable[[int], bool], link: LinkConfig,
                 on_transition=None):
        self.engine = engine
        self.name = name
        self.node_id = node_id
        self.config = config
        self.is_pm = is_pm
        self.link = link
        self.ports: dict = {}
        self.routes: dict = {}
        self.pb = config.make_pb(on_transition=on_transition) if config.scheme is not Scheme.NOPB else None
        self.pbc = Pbc(self.pb, config.pbc_service_ps) if self.pb is not None else None
        self.pi = PiBuffer(config.pi_depth, config.ack_priority)
        self.po: deque = deque()
        self.blocked: dict = defaultdict(deque)
        self.pending: dict = defaultdict(int)
        self.counters = SwitchCounters()
        self.pbc_busy = False
        self.stalled = False
        self._stall_open = False
        self._stall_start = 0
        self._po_busy = False
        self._pb_port_free = 0
        self._final_requested = False
        self.on_irrelevant: Optional[Callable[[Packet, int], None]] = None
        engine.register(name, self)

    # -- wiring ---------------------------------------------------------
    def connect(self, port: str, channel) -> None:
        self.ports[port] = channel

    def add_route(self, destination: int, port: str) -> None:
        self.routes[destination] = port

    def route_packet(self, packet: Packet) -> str:
        try:
            return self.routes[packet.header.destination]
        except KeyError:
            raise SimulationError(f"{self.name}: no route to node {packet.header.destination}") from None

    # -- ingress --------------------------------------------------------
    def receive(self, packet: Packet, port: str) -> None:
        eng = self.engine
        if packet.kind is Kind.IRRELEVANT:
            eng.after(self.config.traversal_ps, self._route_out, packet, target=self.name)
            return
        decision = self.classify(packet)
        if decision.capture:
            self.counters.captured[decision.reason.value] += 1
            if packet.kind is Kind.MEM_WRITE:
                self.pending[packet.tag] += 1
        eng.after(self.config.traversal_ps, self._pipeline_exit, packet, port, decision, target=self.name)

    def classify(self, packet: Packet) -> PbcsDecision:
        pb = self.pb
        if pb is None:
            return PASS
        if packet.kind is Kind.WRITE_ACK or (packet.kind is Kind.MEM_READ and self.is_pm(packet.address)):
            # selector reads PB state over the shared PB port
            start = max(self.engine.now, self._pb_port_free)
            self._pb_port_free = start + pb.tag_access_latency
            self.counters.pbcs_lookups += 1
            if packet.kind is Kind.MEM_READ:
                self.counters.pb_read_lookups += 1
        pending = self.pending if self.config.pending_write_check else None
        return pbcs_classify(packet, pb, self.is_pm, pending)

    def _pipeline_exit(self, packet: Packet, port: str, decision: PbcsDecision) -> None:
        q = self.blocked.get(port)
        if q:
            q.append((packet, decision))
            return
        if not self._admit(packet, decision):
            self.blocked[port].append((packet, decision))
            self.counters.hol_blocked += 1

    def _admit(self, packet: Packet, decision: PbcsDecision) -> bool:
        if not decision.capture:
            self._route_out(packet)
            return True
        if not self.pi.has_room(packet):
            return False
        self.pi.push(packet)
        if len(self.pi) > self.counters.pi_max:
            self.counters.pi_max = len(self.pi)
        self._kick()
        return True

    def _unblock(self) -> None:
        for port in sorted(self.blocked):
            q = self.blocked[port]
            while q and self._admit(*q[0]):
                q.popleft()

    def _route_out(self, packet: Packet) -> None:
        port = self.route_packet(packet)
        self.ports[port].send(packet)

    # -- PBC ------------------------------------------------------------
    def _kick(self) -> None:
        if self.pbc_busy or self.pbc is None or len(self.po) >= self.config.po_depth:
            return
        front = self.pi.front()
        if front is not None and not (self.stalled and front.kind is not Kind.WRITE_ACK):
            self._start_slot(final_only=False)
        elif self._final_requested and self.pb.dirty_count:
            self._start_slot(final_only=True)

    def _start_slot(self, final_only: bool) -> None:
        now = self.engine.now
        start = max(now, self._pb_port_free)
        self.counters.pb_port_wait_ps += start - now
        self.pbc_busy = True
        self.engine.at(start, self._service, final_only, target=self.name)

    def _service(self, final_only: bool) -> None:
        eng = self.engine
        c = self.counters
        if final_only:
            res = self.pbc.drain_all()
        else:
            packet = self.pi.front()
            res = self.pbc.service(packet)
            if res.stalled:
                self.stalled = True
                if not self._stall_open:
                    self._stall_open = True
                    self._stall_start = eng.now
                    c.stall_events += 1
            else:
                self.pi.pop()
                if packet.kind is Kind.WRITE_ACK:
                    c.acks_consumed += 1
                    # an entry just went Empty: the stalled write may retry
                    self.stalled = False
                else:
                    if packet.kind is Kind.MEM_WRITE:
                        self.pending[packet.tag] -= 1
                        if not self.pending[packet.tag]:
                            del self.pending[packet.tag]
                    if self._stall_open:
                        self._stall_open = False
                        c.stall_ps += eng.now - self._stall_start
                    self._unblock()
            c.inserts += res.inserted
            c.coalesces += res.coalesced
            c.pb_read_hits += res.forwarded
            c.rerouted_reads += res.rerouted
        now = eng.now
        for offset, out in res.outputs:
            if out.kind is Kind.MEM_WRITE:
                c.drains += 1
            eng.at(now + offset, self._po_push, out, target=self.name)
        self._pb_port_free = now + res.busy_ps
        eng.at(now + res.busy_ps, self._slot_done, target=self.name)

    def _slot_done(self) -> None:
        self.pbc_busy = False
        self._kick()

    # -- PO buffer --------------------------------------------------------
    def _po_push(self, packet: Packet) -> None:
        self.po.append(packet)
        if len(self.po) > self.counters.po_max:
            self.counters.po_max = len(self.po)
        if not self._po_busy:
            self._po_release()

    def _po_release(self) -> None:
        if not self.po:
            self._po_busy = False
            return
        self._po_busy = True
        packet = self.po.popleft()
        self.engine.after(self.config.traversal_ps, self._route_out, packet, target=self.name)
        self.engine.after(serialization_delay(packet, self.link), self._po_release, target=self.name)
        self._kick()

    # -- end of run ---------------------------------------------------------
    def request_final_drain(self) -> None:
        if self.pbc is None:
            return
        self.pbc.final_drain = True
        self._final_requested = True
        self._kick()

    @property
    def quiescent(self) -> bool:
        return (not self.pi and not self.po and not self.pbc_busy
                and all(not q for q in self.blocked.values()))
