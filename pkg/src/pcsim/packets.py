"""Fabric messages: kinds, headers, flit sizing and address/tag arithmetic."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

LINE_BYTES = 64
LINE_SHIFT = 6
HEADER_BYTES = 16
FLIT_BYTES = 68
TAG_BITS = 58
TAG_MASK = (1 << TAG_BITS) - 1


def tag_of(address: int) -> int:
    """Cache-line tag of a 64-bit physical address (drops the 6 offset bits)."""
    return (address >> LINE_SHIFT) & TAG_MASK


def address_of(tag: int) -> int:
    return tag << LINE_SHIFT


def is_aligned(address: int) -> bool:
    return address % LINE_BYTES == 0


class Kind(Enum):
    MEM_WRITE = "MemWrite"
    MEM_READ = "MemRead"
    READ_RESPONSE = "ReadResponse"
    WRITE_ACK = "WriteAck"
    IRRELEVANT = "Irrelevant"

    @property
    def has_payload(self) -> bool:
        return self in (Kind.MEM_WRITE, Kind.READ_RESPONSE)

    @property
    def toward_host(self) -> bool:
        return self in (Kind.READ_RESPONSE, Kind.WRITE_ACK)


@dataclass(frozen=True)
class DataVersion:
    """Stand-in for 64 B of line contents: which store produced them."""

    address: int
    version: int
    writer_thread: int = 0


@dataclass(frozen=True)
class Header:
    """16-byte metadata slot carried with every packet."""

    source: int
    destination: int
    request_id: int
    opcode: Kind


@dataclass(frozen=True)
class Packet:
    kind: Kind
    header: Header
    address: int = 0
    data: Optional[DataVersion] = None
    issue_time: int = 0
    # Irrelevant packets only: "io" or "cache"; payload flag picks the size class
    traffic_class: str = ""
    payload: bool = False

    def __post_init__(self):
        if self.kind in (Kind.MEM_WRITE, Kind.READ_RESPONSE) and self.data is None:
            raise ValueError(f"{self.kind.value} requires a data payload")
        if self.kind in (Kind.MEM_READ, Kind.WRITE_ACK) and self.data is not None:
            raise ValueError(f"{self.kind.value} carries no data payload")

    @property
    def tag(self) -> int:
        return tag_of(self.address)

    @property
    def carries_payload(self) -> bool:
        if self.kind is Kind.IRRELEVANT:
            return self.payload
        return self.kind.has_payload

    @property
    def size_bytes(self) -> int:
        return HEADER_BYTES + (LINE_BYTES if self.carries_payload else 0)


class RequestIds:
    """Monotone request-id source; ids are never reused within a run."""

    def __init__(self, start: int = 1):
        self._it = itertools.count(start)

    def next(self) -> int:
        return next(self._it)


def mem_write(src: int, dst: int, rid: int, data: DataVersion, now: int = 0) -> Packet:
    return Packet(Kind.MEM_WRITE, Header(src, dst, rid, Kind.MEM_WRITE), data.address, data, now)


def mem_read(src: int, dst: int, rid: int, address: int, now: int = 0) -> Packet:
    return Packet(Kind.MEM_READ, Header(src, dst, rid, Kind.MEM_READ), address, None, now)


def write_ack(request: Packet, now: int = 0) -> Packet:
    """Ack addressed back to the request's source, echoing its request id."""
    h = request.header
    return Packet(Kind.WRITE_ACK, Header(h.destination, h.source, h.request_id, Kind.WRITE_ACK),
                  request.address, None, now)


def read_response(request: Packet, data: DataVersion, now: int = 0) -> Packet:
    h = request.header
    return Packet(Kind.READ_RESPONSE, Header(h.destination, h.source, h.request_id, Kind.READ_RESPONSE),
                  request.address, data, now)


@dataclass(frozen=True)
class LinkConfig:
    lanes: int = 16
    gbytes_per_lane: float = 30.0
    latency_ps: int = 30_000

    def __post_init__(self):
        if self.lanes <= 0 or self.gbytes_per_lane <= 0:
            raise ValueError("link bandwidth must be positive")
        if self.latency_ps < 0:
            raise ValueError("link latency must be non-negative")

    @property
    def bytes_per_second(self) -> float:
        return self.lanes * self.gbytes_per_lane * 1e9

    @property
    def flit_time_ps(self) -> int:
        # 68 B at 480 GB/s is 141.67 ps; round up to whole picoseconds
        return math.ceil(FLIT_BYTES * 1e12 / self.bytes_per_second - 1e-9)


def flits(size_bytes: int) -> int:
    return -(-size_bytes // FLIT_BYTES)


def serialization_delay(packet: Packet, link: LinkConfig) -> int:
    return flits(packet.size_bytes) * link.flit_time_ps
