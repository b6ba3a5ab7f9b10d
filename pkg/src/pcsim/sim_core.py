"""Deterministic discrete-event engine.

Time is an integer count of picoseconds.  Events firing at the same time are
dispatched in the order they were scheduled, which makes every run a pure
function of (config, seed, trace).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

PS = 1
NS = 1000
US = 1000 * NS


class SimulationError(RuntimeError):
    """Fatal modelling error (bad schedule, protocol violation, ...)."""


class LivelockError(SimulationError):
    """Too many events dispatched without any host progress."""


class DeadlockError(SimulationError):
    """Event queue drained while work was still outstanding."""


@dataclass(order=True)
class Event:
    fire_time: int
    sequence_number: int
    target: str = field(compare=False, default="")
    payload: Any = field(compare=False, default=None)


@dataclass
class SimStats:
    events: int
    clock: int
    pending: int


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator; one independent stream per purpose."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


class Engine:
    """Single-threaded event loop.

    Handlers are plain callables. ``schedule`` accepts an :class:`Event`
    whose payload is ``(callable, args)``; ``at``/``after`` are shortcuts used
    by the components.
    """

    def __init__(self, livelock_ceiling: Optional[int] = 20_000, record_log: bool = False):
        self.now = 0
        self._queue: list = []
        self._seq = 0
        self.dispatched = 0
        self.livelock_ceiling = livelock_ceiling
        self._since_progress = 0
        self.guard_active = False
        self.components: dict[str, Any] = {}
        self.log: Optional[list] = [] if record_log else None
        self.post_dispatch: Optional[Callable[[int], None]] = None
        self._stopped = False

    def register(self, name: str, component: Any) -> None:
        if name in self.components:
            raise SimulationError(f"duplicate component {name!r}")
        self.components[name] = component

    # -- scheduling -----------------------------------------------------
    def schedule(self, event: Event) -> None:
        if event.fire_time < self.now:
            raise SimulationError(
                f"event for {event.target!r} scheduled at {event.fire_time} ps, clock is {self.now} ps"
            )
        fn, args = event.payload
        # uid breaks ties between caller-supplied sequence numbers
        heapq.heappush(self._queue, (event.fire_time, event.sequence_number, self._seq, event.target, fn, args))
        self._seq = max(self._seq, event.sequence_number) + 1

    def next_sequence(self) -> int:
        return self._seq

    def at(self, time: int, fn: Callable, *args, target: str = "") -> None:
        if time < self.now:
            raise SimulationError(f"event for {target or fn!r} scheduled in the past ({time} < {self.now})")
        seq = self._seq
        heapq.heappush(self._queue, (time, seq, seq, target, fn, args))
        self._seq = seq + 1

    def after(self, delay: int, fn: Callable, *args, target: str = "") -> None:
        self.at(self.now + delay, fn, *args, target=target)

    # -- progress / guard -----------------------------------------------
    def progress(self) -> None:
        self._since_progress = 0

    def stop(self) -> None:
        self._stopped = True

    @property
    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, limit_time: Optional[int] = None, max_events: Optional[int] = None) -> SimStats:
        """Dispatch events until the queue empties or a limit is hit.

        ``limit_time`` is inclusive; ``max_events`` counts events dispatched in
        this call.
        """
        if not self.components:
            raise SimulationError("no components registered")
        q = self._queue
        pop = heapq.heappop
        budget = max_events
        log = self.log
        hook = self.post_dispatch
        ceiling = self.livelock_ceiling
        self._stopped = False
        while q and not self._stopped:
            if budget is not None and budget <= 0:
                break
            if limit_time is not None and q[0][0] > limit_time:
                break
            time, seq, _, target, fn, args = pop(q)
            self.now = time
            if log is not None:
                log.append((time, seq, target, getattr(fn, "__name__", "?")))
            fn(*args)
            self.dispatched += 1
            if budget is not None:
                budget -= 1
            if self.guard_active and ceiling is not None:
                self._since_progress += 1
                if self._since_progress > ceiling:
                    raise LivelockError(
                        f"{self._since_progress} events without host progress at t={time} ps "
                        f"(last handler {target}:{getattr(fn, '__name__', '?')})"
                    )
            if hook is not None:
                hook(self.dispatched)
        return SimStats(events=self.dispatched, clock=self.now, pending=len(q))
