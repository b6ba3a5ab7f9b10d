"""Persist buffer: fully associative tag/data/state tables with exact LRU.

Entries move Empty -> Dirty -> Drain -> Empty.  Under read forwarding a Dirty
entry may also absorb a newer version of its line (Dirty -> Dirty).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .packets import DataVersion, Header, Packet, mem_write, tag_of


class Scheme(str, Enum):
    NOPB = "NoPB"
    PB = "PB"
    PB_RF = "PB_RF"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        for s in cls:
            if s.value.lower() == text.strip().lower():
                return s
        raise ValueError(f"unknown scheme {text!r} (expected NoPB, PB or PB_RF)")


class PbeState(str, Enum):
    EMPTY = "Empty"
    DIRTY = "Dirty"
    DRAIN = "Drain"


LEGAL = {
    (PbeState.EMPTY, PbeState.DIRTY),
    (PbeState.DIRTY, PbeState.DRAIN),
    (PbeState.DRAIN, PbeState.EMPTY),
    (PbeState.DIRTY, PbeState.DIRTY),
}


class PersistBufferError(RuntimeError):
    """State-machine or protocol violation inside the buffer."""


class Outcome(str, Enum):
    INSERTED = "inserted"
    COALESCED = "coalesced"
    NEEDS_VICTIM = "needs_victim"
    MUST_STALL = "must_stall"


@dataclass(frozen=True)
class InsertResult:
    outcome: Outcome
    index: Optional[int] = None


@dataclass
class PersistBufferEntry:
    tag: int = 0
    data: Optional[DataVersion] = None
    header: Optional[Header] = None
    state: PbeState = PbeState.EMPTY
    lru_counter: int = 0


def fraction_count(fraction: float, length: int) -> int:
    # round first so 0.8 * 5 == 4.000000000000001 does not ceil to 5
    return math.ceil(round(fraction * length, 9))


@dataclass
class PersistBuffer:
    length: int = 16
    scheme: Scheme = Scheme.PB
    drain_threshold: float = 0.80
    preset: float = 0.60
    tag_access_latency: int = 388
    data_access_latency: int = 785
    on_transition: Optional[Callable[[int, PbeState, PbeState, int], None]] = None
    entries: list = field(init=False)

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("persist buffer needs at least one entry")
        if not 0 < self.preset <= self.drain_threshold <= 1:
            raise ValueError("need 0 < preset <= drain_threshold <= 1")
        # counters form a permutation of 0..n-1; larger is older, index 0 starts oldest
        self.entries = [PersistBufferEntry(lru_counter=self.length - 1 - i) for i in range(self.length)]
        self._by_tag: dict[int, int] = {}
        self.counts = {PbeState.EMPTY: self.length, PbeState.DIRTY: 0, PbeState.DRAIN: 0}
        self.coalesce_count = 0
        self.drain_count = 0

    # -- bookkeeping ----------------------------------------------------
    @property
    def counter_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.length)))

    @property
    def dirty_count(self) -> int:
        return self.counts[PbeState.DIRTY]

    @property
    def drain_count_now(self) -> int:
        return self.counts[PbeState.DRAIN]

    @property
    def empty_count(self) -> int:
        return self.counts[PbeState.EMPTY]

    @property
    def drain_trigger(self) -> int:
        return fraction_count(self.drain_threshold, self.length)

    @property
    def preset_count(self) -> int:
        return fraction_count(self.preset, self.length)

    def _set_state(self, idx: int, new: PbeState) -> None:
        e = self.entries[idx]
        old = e.state
        if (old, new) not in LEGAL:
            raise PersistBufferError(f"illegal transition {old.value}->{new.value} on entry {idx}")
        if old is not new:
            self.counts[old] -= 1
            self.counts[new] += 1
        e.state = new
        if self.on_transition is not None:
            self.on_transition(idx, old, new, e.tag)

    def touch(self, idx: int) -> None:
        """Mark entry most recently used."""
        c = self.entries[idx].lru_counter
        for e in self.entries:
            if e.lru_counter < c:
                e.lru_counter += 1
        self.entries[idx].lru_counter = 0

    def _oldest(self, state: PbeState) -> Optional[int]:
        best, best_c = None, -1
        for i, e in enumerate(self.entries):
            if e.state is state and e.lru_counter > best_c:
                best, best_c = i, e.lru_counter
        return best

    def lru_order(self, state: PbeState) -> list[int]:
        """Indices in ``state``, oldest first."""
        idx = [i for i, e in enumerate(self.entries) if e.state is state]
        return sorted(idx, key=lambda i: -self.entries[i].lru_counter)

    # -- operations -----------------------------------------------------
    def lookup(self, tag: int) -> Optional[tuple[int, PbeState]]:
        idx = self._by_tag.get(tag)
        if idx is None:
            return None
        return idx, self.entries[idx].state

    def insert(self, tag: int, data: DataVersion, header: Header) -> InsertResult:
        hit = self._by_tag.get(tag)
        if hit is not None:
            e = self.entries[hit]
            if self.scheme is Scheme.PB_RF and e.state is PbeState.DIRTY:
                self.coalesce(hit, data, header)
                return InsertResult(Outcome.COALESCED, hit)
            raise PersistBufferError(f"tag {tag:#x} already resident ({e.state.value})")
        idx = self._oldest(PbeState.EMPTY)
        if idx is not None:
            e = self.entries[idx]
            e.tag, e.data, e.header = tag, data, header
            self._by_tag[tag] = idx
            self._set_state(idx, PbeState.DIRTY)
            self.touch(idx)
            return InsertResult(Outcome.INSERTED, idx)
        victim = self._oldest(PbeState.DIRTY)
        if victim is not None:
            return InsertResult(Outcome.NEEDS_VICTIM, victim)
        return InsertResult(Outcome.MUST_STALL)

    def coalesce(self, idx: int, data: DataVersion, header: Optional[Header] = None) -> None:
        e = self.entries[idx]
        if e.state is not PbeState.DIRTY:
            raise PersistBufferError(f"coalesce onto {e.state.value} entry {idx}")
        if tag_of(data.address) != e.tag:
            raise PersistBufferError("coalesce with mismatched tag")
        if e.data is not None and data.version <= e.data.version:
            raise PersistBufferError(
                f"coalesce must raise the version (have v{e.data.version}, got v{data.version})"
            )
        e.data = data
        if header is not None:
            e.header = header
        self._set_state(idx, PbeState.DIRTY)
        self.touch(idx)
        self.coalesce_count += 1

    def issue_drain(self, idx: int) -> Packet:
        e = self.entries[idx]
        if e.state is not PbeState.DIRTY:
            raise PersistBufferError(f"drain of {e.state.value} entry {idx}")
        self._set_state(idx, PbeState.DRAIN)
        self.drain_count += 1
        h = e.header
        return mem_write(h.source, h.destination, h.request_id, e.data)

    def apply_ack(self, tag: int) -> int:
        idx = self._by_tag.get(tag)
        if idx is None or self.entries[idx].state is not PbeState.DRAIN:
            raise PersistBufferError(f"ack for tag {tag:#x} with no Drain entry")
        self._set_state(idx, PbeState.EMPTY)
        del self._by_tag[tag]
        return idx

    def rf_drain_policy(self) -> list[int]:
        """Dirty entries to drain now, oldest first (empty below the trigger)."""
        if self.scheme is not Scheme.PB_RF:
            raise PersistBufferError("drain-threshold policy applies to PB_RF only")
        dirty = self.dirty_count
        if dirty < self.drain_trigger:
            return []
        return self.lru_order(PbeState.DIRTY)[: dirty - self.preset_count]

    def resident(self) -> list[tuple[int, DataVersion, PbeState]]:
        """Non-Empty entries as (tag, data, state); this is what survives a crash."""
        return [(e.tag, e.data, e.state) for e in self.entries if e.state is not PbeState.EMPTY]

    def forward(self, idx: int) -> DataVersion:
        """Read-forwarding hit: return the entry's data and refresh its recency."""
        e = self.entries[idx]
        if e.state is PbeState.EMPTY:
            raise PersistBufferError("forward from an Empty entry")
        self.touch(idx)
        return e.data
