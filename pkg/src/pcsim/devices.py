"""Memory-side endpoints: persistent memory, the I/O sink and background traffic."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .packets import DataVersion, Header, Kind, Packet, read_response, write_ack
from .sim_core import Engine, SimulationError

HOST_ID = 0
PM_ID = 1
DRAM_ID = 2
IO_ID = 3


@dataclass(frozen=True)
class AddressRange:
    base: int
    size: int

    @property
    def limit(self) -> int:
        return self.base + self.size

    def __contains__(self, address: int) -> bool:
        return self.base <= address < self.base + self.size

    def overlaps(self, other: "AddressRange") -> bool:
        return self.base < other.limit and other.base < self.limit


@dataclass(frozen=True)
class DramDevice:
    """Host-local volatile memory.  Loads cost a fixed latency; it never acks persists."""

    latency_ps: int = 50_000
    address_range: AddressRange = AddressRange(0, 2 << 30)


class PmDevice:
    """Persistent memory with fixed read/write latency and in-order completion.

    Requests are pipelined but complete in arrival order, so a read that
    arrives after a write always observes it.  A write is applied to
    ``contents`` when it completes and only then acknowledged.
    """

    def __init__(self, engine: Engine, read_ps: int = 100_000, write_ps: int = 200_000,
                 address_range: AddressRange = AddressRange(0x8000_0000, 4 << 30),
                 name: str = "pm", on_apply: Optional[Callable[[int, int, int], None]] = None):
        self.engine = engine
        self.read_ps = read_ps
        self.write_ps = write_ps
        self.address_range = address_range
        self.name = name
        self.contents: dict[int, DataVersion] = {}
        self.on_apply = on_apply
        self.port = None
        self.writes = 0
        self.reads = 0
        self._last_done = 0
        engine.register(name, self)

    def connect(self, channel) -> None:
        self.port = channel

    def receive(self, packet: Packet, port: str = "") -> None:
        self.pm_service(packet)

    def pm_service(self, packet: Packet) -> None:
        if packet.address not in self.address_range:
            raise SimulationError(f"{self.name}: address {packet.address:#x} outside PM range")
        now = self.engine.now
        if packet.kind is Kind.MEM_WRITE:
            done = max(now + self.write_ps, self._last_done)
            self._last_done = done
            self.engine.at(done, self._complete_write, packet, target=self.name)
        elif packet.kind is Kind.MEM_READ:
            done = max(now + self.read_ps, self._last_done)
            self._last_done = done
            self.engine.at(done, self._complete_read, packet, target=self.name)
        else:
            raise SimulationError(f"{self.name}: unexpected {packet.kind.value}")

    def read_version(self, address: int) -> DataVersion:
        return self.contents.get(address, DataVersion(address, 0))

    def _complete_write(self, packet: Packet) -> None:
        if self.on_apply is not None:
            self.on_apply(packet.address, packet.data.version, self.engine.now)
        self.contents[packet.address] = packet.data
        self.writes += 1
        self.port.send(write_ack(packet, self.engine.now))

    def _complete_read(self, packet: Packet) -> None:
        self.reads += 1
        self.port.send(read_response(packet, self.read_version(packet.address), self.engine.now))

    def snapshot(self) -> dict[int, int]:
        return {a: d.version for a, d in self.contents.items()}


class IoSink:
    """Terminates irrelevant (CXL.io / CXL.cache) traffic and records latency."""

    def __init__(self, engine: Engine, name: str = "io"):
        self.engine = engine
        self.name = name
        self.latencies: Counter = Counter()
        engine.register(name, self)

    def receive(self, packet: Packet, port: str = "") -> None:
        self.latencies[self.engine.now - packet.issue_time] += 1


class BackgroundSource:
    """Poisson stream of irrelevant packets injected at a switch ingress.

    Arrival times and packet classes come from a dedicated RNG stream and are
    fixed up front, so the stream is identical whatever the rest of the
    system does.
    """

    def __init__(self, engine: Engine, rng: np.random.Generator, rate_per_us: float, count: int,
                 inject: Callable[[Packet, str], None], port: str = "up",
                 source: int = HOST_ID, destination: int = IO_ID, name: str = "background"):
        self.engine = engine
        self.inject = inject
        self.port = port
        self.name = name
        self.sent = 0
        self._plan = []
        if count > 0 and rate_per_us > 0:
            gaps = rng.exponential(1e6 / rate_per_us, size=count)
            times = np.cumsum(np.rint(gaps).astype(np.int64))
            classes = rng.integers(0, 2, size=count)
            payload = rng.integers(0, 2, size=count)
            for i, t in enumerate(times):
                cls = "io" if classes[i] == 0 else "cache"
                self._plan.append((int(t), cls, bool(payload[i])))
        self._source, self._destination = source, destination
        engine.register(name, self)

    def start(self) -> None:
        for i, (t, cls, payload) in enumerate(self._plan):
            self.engine.at(t, self._emit, i, cls, payload, target=self.name)

    def _emit(self, i: int, cls: str, payload: bool) -> None:
        now = self.engine.now
        pkt = Packet(Kind.IRRELEVANT, Header(self._source, self._destination, -1 - i, Kind.IRRELEVANT),
                     0, None, now, traffic_class=cls, payload=payload)
        self.sent += 1
        self.inject(pkt, self.port)
