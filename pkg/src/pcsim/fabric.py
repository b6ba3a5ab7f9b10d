"""Links and whole-system assembly.

The topology is a chain::

    host -- S1 -- S2 -- ... -- Sn -- PM
             \\
              io sink

With ``n = 0`` the host talks to PM over a zero-latency local connection.
Irrelevant traffic enters S1 from a background source and leaves through a
dedicated I/O port.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .config import ExperimentConfig
from .devices import HOST_ID, IO_ID, PM_ID, BackgroundSource, DramDevice, IoSink, PmDevice
from .host import Host
from .metrics import RunStats, histogram, summarize
from .oracle import CrashPlan, CrashState, Oracle, Verdict, check_crash
from .packets import LinkConfig, Packet, serialization_delay, tag_of
from .persist_buffer import PbeState, Scheme
from .sim_core import DeadlockError, Engine, make_rng
from .switch import Switch
from .traces import TraceOp, trace_hash

BACKGROUND_STREAM = 2


class Channel:
    """One direction of a link: FIFO, serialization then propagation delay.

    ``link=None`` models an on-package connection with no delay at all.
    """

    def __init__(self, engine: Engine, link: Optional[LinkConfig], dest, port: str = "", name: str = ""):
        self.engine = engine
        self.link = link
        self.dest = dest
        self.port = port
        self.name = name
        self._free = 0
        self.sent = 0

    def send(self, packet: Packet) -> None:
        now = self.engine.now
        if self.link is None:
            arrive = now
        else:
            start = max(now, self._free)
            self._free = start + serialization_delay(packet, self.link)
            arrive = self._free + self.link.latency_ps
        self.sent += 1
        self.engine.at(arrive, self.dest.receive, packet, self.port, target=self.dest.name)


@dataclass
class Transition:
    time: int
    switch: int
    entry: int
    old: str
    new: str
    tag: int
    dirty: int
    drain: int


@dataclass
class SweepResult:
    """Outcome of crashing after each of the first ``points`` events."""

    points: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


class System:
    """A host, a chain of switches and a PM device, wired for one run.

    A ``System`` is single-use: build, then call exactly one of :meth:`run`,
    :meth:`run_to_crash` or :meth:`crash_sweep`.
    """

    def __init__(self, config: ExperimentConfig, scheme: Scheme, trace: list[TraceOp], seed: int = 0,
                 strict: bool = False, record_transitions: bool = False, record_ops: bool = False,
                 record_log: bool = False):
        self.config = config
        self.scheme = scheme
        self.trace = trace
        self.seed = seed
        self.trace_hash = trace_hash(trace)
        self.transitions: Optional[list] = [] if record_transitions else None
        self.engine = eng = Engine(livelock_ceiling=config.livelock_ceiling, record_log=record_log)
        self.oracle = Oracle(strict=strict)
        dev = config.devices
        self.pm = PmDevice(eng, dev.pm_read_ps, dev.pm_write_ps, dev.pm_range, on_apply=self.oracle.on_pm_apply)
        self.host = Host(eng, dev.pm_range, DramDevice(dev.dram_ps, dev.dram_range), self.oracle,
                         config.op_gap_ps, record_ops=record_ops)
        self.host.load(trace)
        self.host.on_finished = self._host_finished
        self.switches: list[Switch] = []
        self.io = None
        self.background = None
        self._build()
        self.oracle.persistent_view = self.persistent_version

    # -- assembly -------------------------------------------------------
    def _build(self) -> None:
        cfg, eng = self.config, self.engine
        link = cfg.link
        n = cfg.topology.switches
        pm_range = cfg.devices.pm_range

        def is_pm(address: int) -> bool:
            return address in pm_range

        if n == 0:
            self.host.connect(Channel(eng, None, self.pm, "up", "host->pm"))
            self.pm.connect(Channel(eng, None, self.host, "down", "pm->host"))
            return
        for i in range(n):
            sw = Switch(eng, f"s{i + 1}", 100 + i, cfg.switch_config(i, self.scheme), is_pm, link,
                        on_transition=self._transition_hook(i))
            sw.add_route(HOST_ID, "up")
            sw.add_route(PM_ID, "down")
            self.switches.append(sw)
        first, last = self.switches[0], self.switches[-1]
        self.host.connect(Channel(eng, link, first, "up", "host->s1"))
        first.connect("up", Channel(eng, link, self.host, "down", "s1->host"))
        for a, b in zip(self.switches, self.switches[1:]):
            a.connect("down", Channel(eng, link, b, "up", f"{a.name}->{b.name}"))
            b.connect("up", Channel(eng, link, a, "down", f"{b.name}->{a.name}"))
        last.connect("down", Channel(eng, link, self.pm, "up", f"{last.name}->pm"))
        self.pm.connect(Channel(eng, link, last, "down", f"pm->{last.name}"))

        self.io = IoSink(eng)
        first.add_route(IO_ID, "io")
        first.connect("io", Channel(eng, link, self.io, "", "s1->io"))
        bg = cfg.background
        if bg.count and bg.rate_per_us > 0:
            self.background = BackgroundSource(eng, make_rng(self.seed, BACKGROUND_STREAM), bg.rate_per_us,
                                               bg.count, first.receive)

    def _transition_hook(self, index: int) -> Callable:
        def hook(entry: int, old: PbeState, new: PbeState, tag: int) -> None:
            if self.transitions is not None:
                pb = self.switches[index].pb
                self.transitions.append(Transition(self.engine.now, index, entry, old.value, new.value,
                                                   tag, pb.dirty_count, pb.drain_count_now))
        return hook

    @property
    def persistent_switches(self) -> list[Switch]:
        return [s for s in self.switches if s.pb is not None]

    def persistent_version(self, address: int) -> int:
        """Newest version of ``address`` held anywhere in the persistent domain."""
        best = self.pm.read_version(address).version
        tag = tag_of(address)
        for sw in self.persistent_switches:
            hit = sw.pb.lookup(tag)
            if hit is not None:
                best = max(best, sw.pb.entries[hit[0]].data.version)
        return best

    # -- running --------------------------------------------------------
    def _start(self) -> None:
        self.engine.guard_active = True
        self.host.start()
        if self.background is not None:
            self.background.start()

    def _host_finished(self) -> None:
        # after the last op there is no host progress to watch; the final
        # drain is bounded by the number of resident entries
        self.engine.guard_active = False
        for sw in self.switches:
            sw.request_final_drain()

    def run(self) -> RunStats:
        """Replay the whole trace, drain every buffer and collect statistics."""
        self._start()
        self.engine.run_until()
        self._check_stuck()
        return self.stats()

    def _check_stuck(self) -> None:
        stuck = [th.tid for th in self.host.threads if not th.done]
        busy = [s.name for s in self.switches if not s.quiescent or (s.pb is not None and s.pb.dirty_count)]
        if stuck or busy:
            detail = "; ".join(
                f"{s.name}: PI={len(s.pi)} stalled={s.stalled} "
                f"states={dict((k.value, v) for k, v in s.pb.counts.items()) if s.pb else '-'}"
                for s in self.switches)
            raise DeadlockError(f"event queue empty at t={self.engine.now} ps with threads {stuck} "
                                f"blocked and switches {busy} busy ({detail})")

    def stats(self) -> RunStats:
        host, c = self.host, [s.counters for s in self.switches]
        pc, pm_, p50, p99 = summarize(host.persist_latencies)
        rc, rm, r50, r99 = summarize(host.read_latencies)
        io = self.io.latencies if self.io is not None else {}
        live = sum(len(s.pb.resident()) for s in self.persistent_switches)
        return RunStats(
            scheme=self.scheme.value, seed=self.seed, switches=self.config.topology.switches,
            trace_hash=self.trace_hash, total_time_ps=host.finish_time, events=self.engine.dispatched,
            persist_count=pc, persist_mean_ps=pm_, persist_p50_ps=p50, persist_p99_ps=p99,
            read_count=rc, read_mean_ps=rm, read_p50_ps=r50, read_p99_ps=r99,
            pb_read_hits=sum(x.pb_read_hits for x in c), pb_read_lookups=sum(x.pb_read_lookups for x in c),
            rerouted_reads=sum(x.rerouted_reads for x in c), coalesce_count=sum(x.coalesces for x in c),
            pm_write_count=self.pm.writes, pm_read_count=self.pm.reads, flush_count=host.flushes,
            live_pb_entries=live, stall_ps=sum(x.stall_ps for x in c),
            stall_events=sum(x.stall_events for x in c), hol_blocked=sum(x.hol_blocked for x in c),
            pb_port_wait_ps=sum(x.pb_port_wait_ps for x in c),
            drains_per_switch=[x.drains for x in c], pi_max_per_switch=[x.pi_max for x in c],
            irrelevant_count=sum(io.values()),
            irrelevant_mean_ps=(sum(k * v for k, v in io.items()) / sum(io.values())) if io else 0.0,
            irrelevant_max_ps=max(io) if io else 0,
            irrelevant_hist=histogram(io),
            violations=[v.as_record() for v in self.oracle.violations],
        )

    # -- crashes --------------------------------------------------------
    def crash_state(self) -> CrashState:
        """Snapshot of what survives a power failure right now."""
        return CrashState(
            time=self.engine.now, events=self.engine.dispatched, pm=self.pm.snapshot(),
            buffers=[[(t, d, s.value) for t, d, s in sw.pb.resident()] for sw in self.persistent_switches],
            latest_acked=dict(self.oracle.latest_acked), issued=dict(self.oracle.issued),
        )

    def run_to_crash(self, plan: CrashPlan) -> CrashState:
        """Run until ``plan`` fires; everything volatile is dropped with the engine."""
        if plan.on_marker:
            self.host.on_crash_marker = self.engine.stop
        self._start()
        self.engine.run_until(limit_time=plan.at_time, max_events=plan.after_events)
        return self.crash_state()

    def crash_sweep(self, max_points: int = 5000, stride: int = 1) -> SweepResult:
        """Check recovery as if power failed after every ``stride``-th event.

        The run is deterministic, so the state after event ``k`` of one long
        run equals the state of a run stopped after ``k`` events; checking in
        place avoids ``max_points`` re-simulations.
        """
        result = SweepResult(points=0)

        def after_event(k: int) -> None:
            if k % stride:
                return
            verdict: Verdict = check_crash(self.crash_state())
            result.points += 1
            if not verdict.ok:
                result.failures.append(verdict)

        self.engine.post_dispatch = after_event
        self._start()
        self.engine.run_until(max_events=max_points)
        self.engine.post_dispatch = None
        return result


def simulate(config: ExperimentConfig, scheme: Scheme, trace: list[TraceOp], seed: int = 0, **kw) -> RunStats:
    return System(config, scheme, trace, seed, **kw).run()
