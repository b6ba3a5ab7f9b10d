"""Host operation traces: the text format and synthetic generators.

File format, one op per line::

    <thread> <load|store|flush|fence|crash> [hex-address]

``fence`` and ``crash`` take no address; ``#`` starts a comment line.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Union

from .packets import LINE_BYTES
from .sim_core import make_rng

PM_BASE = 0x8000_0000
TRACE_STREAM = 1


class Op(str, Enum):
    LOAD = "load"
    STORE = "store"
    FLUSH = "flush"
    FENCE = "fence"
    CRASH = "crash"


@dataclass(frozen=True)
class TraceOp:
    kind: Op
    address: int = 0
    thread: int = 0

    def to_line(self) -> str:
        if self.kind in (Op.FENCE, Op.CRASH):
            return f"{self.thread} {self.kind.value}"
        return f"{self.thread} {self.kind.value} {self.address:#x}"


class TraceError(ValueError):
    pass


def parse_trace(text: str) -> list[TraceOp]:
    ops = []
    crashes = 0
    stored: set = set()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            thread = int(parts[0])
            kind = Op(parts[1].lower())
        except (IndexError, ValueError):
            raise TraceError(f"line {n}: cannot parse {raw!r}") from None
        if kind in (Op.FENCE, Op.CRASH):
            if len(parts) != 2:
                raise TraceError(f"line {n}: {kind.value} takes no address")
            address = 0
        else:
            if len(parts) != 3:
                raise TraceError(f"line {n}: {kind.value} needs an address")
            try:
                address = int(parts[2], 16)
            except ValueError:
                raise TraceError(f"line {n}: bad address {parts[2]!r}") from None
        if kind is Op.CRASH:
            crashes += 1
            if crashes > 1:
                raise TraceError(f"line {n}: at most one crash marker per trace")
        if kind is Op.STORE:
            stored.add(address)
        if kind is Op.FLUSH and address not in stored:
            raise TraceError(f"line {n}: flush of {address:#x} before any store to it")
        ops.append(TraceOp(kind, address, thread))
    return ops


def format_trace(ops: Iterable[TraceOp], comment: Optional[str] = None) -> str:
    lines = [f"# {comment}"] if comment else []
    lines.extend(op.to_line() for op in ops)
    return "\n".join(lines) + "\n"


def read_trace(path: Union[str, Path]) -> list[TraceOp]:
    return parse_trace(Path(path).read_text())


def write_trace(ops: Iterable[TraceOp], path: Union[str, Path], comment: Optional[str] = None) -> None:
    Path(path).write_text(format_trace(ops, comment))


def trace_hash(ops: Iterable[TraceOp]) -> str:
    return hashlib.sha256(format_trace(ops).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TraceSpec:
    """Parameters for a synthetic trace.

    One logical op is either a load or a persist (store + flush); a fence
    follows every ``flushes_per_fence`` persists of a thread.  Ops are dealt
    to threads round-robin.
    """

    kind: str = "uniform"
    ops: int = 1000
    threads: int = 8
    lines: int = 64
    base: int = PM_BASE
    read_fraction: float = 0.5
    locality: float = 0.9
    hot_lines: int = 8
    flushes_per_fence: int = 1

    KINDS = ("uniform", "hotset", "scan", "persist_heavy")

    def validate(self) -> None:
        if self.kind not in self.KINDS:
            raise TraceError(f"unknown trace kind {self.kind!r}; expected one of {', '.join(self.KINDS)}")
        if self.ops <= 0 or self.threads <= 0 or self.lines <= 0:
            raise TraceError("ops, threads and lines must be positive")
        if not 0 <= self.read_fraction <= 1 or not 0 <= self.locality <= 1:
            raise TraceError("read_fraction and locality must lie in [0, 1]")
        if not 0 < self.hot_lines <= self.lines:
            raise TraceError("hot_lines must be in 1..lines")
        if self.flushes_per_fence < 1:
            raise TraceError("flushes_per_fence must be >= 1")
        if self.base % LINE_BYTES:
            raise TraceError("base must be line aligned")

    @classmethod
    def for_kind(cls, kind: str, **overrides) -> "TraceSpec":
        defaults = {"persist_heavy": {"read_fraction": 0.1}, "scan": {"read_fraction": 0.3, "lines": 4096}}
        return replace(cls(kind=kind, **defaults.get(kind, {})), **overrides)

    @classmethod
    def parse(cls, text: str) -> "TraceSpec":
        """``kind[:key=value,...]``, e.g. ``hotset:ops=1000,locality=0.9``."""
        kind, _, rest = text.strip().partition(":")
        types = {f.name: f.type for f in fields(cls)}
        overrides = {}
        for item in filter(None, (p.strip() for p in rest.split(","))):
            key, eq, value = item.partition("=")
            key = key.strip()
            if not eq or key not in types or key == "kind":
                raise TraceError(f"bad trace parameter {item!r}")
            conv = float if types[key] in (float, "float") else int
            try:
                overrides[key] = conv(value, 0) if conv is int else conv(value)
            except ValueError:
                raise TraceError(f"bad value for {key}: {value!r}") from None
        spec = cls.for_kind(kind.strip(), **overrides)
        spec.validate()
        return spec

    def describe(self) -> str:
        return (f"{self.kind}:ops={self.ops},threads={self.threads},lines={self.lines},"
                f"read_fraction={self.read_fraction},locality={self.locality},hot_lines={self.hot_lines},"
                f"flushes_per_fence={self.flushes_per_fence},base={self.base:#x}")


def generate_trace(spec: TraceSpec, seed: int = 0) -> list[TraceOp]:
    spec.validate()
    rng = make_rng(seed, TRACE_STREAM)
    n = spec.ops
    is_read = rng.random(n) < spec.read_fraction
    if spec.kind == "scan":
        lines = [i % spec.lines for i in range(n)]
    elif spec.kind == "hotset":
        hot = rng.random(n) < spec.locality
        hot_pick = rng.integers(0, spec.hot_lines, size=n)
        cold_span = spec.lines - spec.hot_lines
        if cold_span:
            cold_pick = spec.hot_lines + rng.integers(0, cold_span, size=n)
        else:
            cold_pick = hot_pick
        lines = [int(h if is_hot else c) for is_hot, h, c in zip(hot, hot_pick, cold_pick)]
    else:
        lines = [int(x) for x in rng.integers(0, spec.lines, size=n)]

    ops: list[TraceOp] = []
    since_fence = [0] * spec.threads
    for i in range(n):
        t = i % spec.threads
        addr = spec.base + lines[i] * LINE_BYTES
        if is_read[i]:
            ops.append(TraceOp(Op.LOAD, addr, t))
            continue
        ops.append(TraceOp(Op.STORE, addr, t))
        ops.append(TraceOp(Op.FLUSH, addr, t))
        since_fence[t] += 1
        if since_fence[t] == spec.flushes_per_fence:
            ops.append(TraceOp(Op.FENCE, 0, t))
            since_fence[t] = 0
    for t, pending in enumerate(since_fence):
        if pending:
            ops.append(TraceOp(Op.FENCE, 0, t))
    return ops


def persist_only(count: int, lines: int = 4096, threads: int = 1, base: int = PM_BASE) -> list[TraceOp]:
    """Sequential store/flush/fence over distinct lines (no reuse within a pass)."""
    spec = TraceSpec(kind="scan", ops=count, threads=threads, lines=lines, base=base, read_fraction=0.0)
    return generate_trace(spec)


def hot_line(count: int, address: int = PM_BASE, thread: int = 0, fence_each: bool = True) -> list[TraceOp]:
    """``count`` persists of one line."""
    ops = []
    for _ in range(count):
        ops += [TraceOp(Op.STORE, address, thread), TraceOp(Op.FLUSH, address, thread)]
        if fence_each:
            ops.append(TraceOp(Op.FENCE, 0, thread))
    if not fence_each:
        ops.append(TraceOp(Op.FENCE, 0, thread))
    return ops
