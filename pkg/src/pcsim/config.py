"""Experiment configuration: an INI-style text format with Table-1 style defaults.

Times are written in nanoseconds (fractions allowed) and stored as integer
picoseconds.  Every section and key is optional; an empty file yields the
default single-switch setup.  Example::

    [topology]
    switches = 2
    persistent = first        ; first | all | none | comma list of 1-based indices

    [devices]
    pm_write_ns = 200

    [trace]
    source = hotset:ops=2000,locality=0.9
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .devices import AddressRange
from .packets import LinkConfig
from .persist_buffer import Scheme
from .switch import PbConfig, SwitchConfig
from .traces import TraceError, TraceSpec


class ConfigError(ValueError):
    """Invalid configuration; ``diagnostics`` lists ``(field_path, message)`` pairs."""

    def __init__(self, diagnostics: list):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.diagnostics))


@dataclass(frozen=True)
class Topology:
    switches: int = 1
    persistent: str = "first"

    def persistent_indices(self) -> list[int]:
        """0-based indices of the switches that carry a persist buffer."""
        mode = self.persistent.strip().lower()
        if self.switches == 0 or mode == "none":
            return []
        if mode == "first":
            return [0]
        if mode == "all":
            return list(range(self.switches))
        return sorted({int(x) - 1 for x in mode.split(",") if x.strip()})


@dataclass(frozen=True)
class DeviceTimings:
    pm_read_ps: int = 100_000
    pm_write_ps: int = 200_000
    dram_ps: int = 50_000
    pm_range: AddressRange = AddressRange(0x8000_0000, 4 << 30)
    dram_range: AddressRange = AddressRange(0, 2 << 30)


@dataclass(frozen=True)
class Background:
    """Irrelevant (I/O and cache-protocol) packets injected at the first switch."""

    rate_per_us: float = 0.0
    count: int = 0


# Invented tag/data access times per PBE count, growing with the table size.
DEFAULT_SENSITIVITY = {
    8: (300, 650),
    16: (388, 785),
    32: (520, 980),
    64: (700, 1250),
}


@dataclass
class ExperimentConfig:
    topology: Topology = field(default_factory=Topology)
    switch: SwitchConfig = field(default_factory=SwitchConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    devices: DeviceTimings = field(default_factory=DeviceTimings)
    threads: int = 8
    op_gap_ps: int = 250
    trace: str = "hotset:ops=1000"
    seeds: list = field(default_factory=lambda: [0])
    schemes: list = field(default_factory=lambda: [Scheme.NOPB, Scheme.PB, Scheme.PB_RF])
    background: Background = field(default_factory=Background)
    sensitivity: dict = field(default_factory=lambda: dict(DEFAULT_SENSITIVITY))
    out_dir: str = "results"
    livelock_ceiling: int = 20_000

    def trace_spec(self) -> Optional[TraceSpec]:
        """Generator spec for the trace source, or None if it names a file."""
        if self.trace.startswith("file:"):
            return None
        spec = TraceSpec.parse(self.trace)
        if "threads=" not in self.trace:
            spec = replace(spec, threads=self.threads)
        if "base=" not in self.trace:
            spec = replace(spec, base=self.devices.pm_range.base)
        return spec

    def switch_config(self, index: int, scheme: Scheme) -> SwitchConfig:
        """Config for switch ``index``: the run's scheme if it is persistent, else NoPB."""
        persistent = index in self.topology.persistent_indices()
        return replace(self.switch, scheme=scheme if persistent else Scheme.NOPB)

    def with_pb_entries(self, entries: int) -> "ExperimentConfig":
        tag, data = self.sensitivity[entries]
        pb = replace(self.switch.pb, entries=entries, tag_access_ps=tag, data_access_ps=data)
        return replace(self, switch=replace(self.switch, pb=pb))


# -- parsing ---------------------------------------------------------------

def _ps(text: str) -> int:
    return round(float(text) * 1000)


def _int(text: str) -> int:
    return int(text.strip(), 0)


class _Reader:
    """Pulls typed values out of a ConfigParser, collecting diagnostics."""

    def __init__(self, parser: configparser.ConfigParser):
        self.p = parser
        self.errors: list = []
        self.used: set = set()

    def get(self, section: str, key: str, conv, default):
        self.used.add((section, key))
        if not self.p.has_option(section, key):
            return default
        raw = self.p.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.errors.append((f"{section}.{key}", f"cannot parse {raw!r} ({exc})"))
            return default

    def check(self, ok: bool, path: str, msg: str) -> None:
        if not ok:
            self.errors.append((path, msg))


KNOWN_SECTIONS = {"topology", "switch", "link", "devices", "host", "trace", "run", "background", "sensitivity"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([("<file>", str(exc).splitlines()[0])]) from None
    r = _Reader(parser)
    d = ExperimentConfig()
    sw, pb, dev = d.switch, d.switch.pb, d.devices

    topo = Topology(r.get("topology", "switches", _int, d.topology.switches),
                    r.get("topology", "persistent", str.strip, d.topology.persistent))
    r.check(topo.switches >= 0, "topology.switches", "must be >= 0")
    try:
        idx = topo.persistent_indices()
        r.check(all(0 <= i < topo.switches for i in idx), "topology.persistent",
                f"switch index out of range 1..{topo.switches}")
    except ValueError:
        r.errors.append(("topology.persistent", "expected first, all, none or a list of switch indices"))

    scheme = r.get("switch", "scheme", Scheme.parse, sw.scheme)
    pbc = PbConfig(
        entries=r.get("switch", "pb_entries", _int, pb.entries),
        drain_threshold=r.get("switch", "drain_threshold", float, pb.drain_threshold),
        preset=r.get("switch", "preset", float, pb.preset),
        tag_access_ps=r.get("switch", "tag_access_ns", _ps, pb.tag_access_ps),
        data_access_ps=r.get("switch", "data_access_ns", _ps, pb.data_access_ps),
    )
    stage = r.get("switch", "stage_latency_ns", _ps, sw.stage_latency_ps)
    service = r.get("switch", "pbc_service_ns", _ps, sw.pbc_service_ps)
    pi_depth = r.get("switch", "pi_depth", _int, sw.pi_depth)
    po_depth = r.get("switch", "po_depth", _int, sw.po_depth)
    ack_priority = r.get("switch", "ack_priority", _bool, sw.ack_priority)
    r.check(stage > 0, "switch.stage_latency_ns", "must be > 0")
    r.check(service > 0, "switch.pbc_service_ns", "must be > 0")
    r.check(pbc.tag_access_ps > 0, "switch.tag_access_ns", "must be > 0")
    r.check(pbc.data_access_ps > 0, "switch.data_access_ns", "must be > 0")
    r.check(pi_depth >= 1, "switch.pi_depth", "must be >= 1")
    r.check(po_depth >= 1, "switch.po_depth", "must be >= 1")
    r.check(pbc.entries >= 1, "switch.pb_entries", "must be >= 1")
    r.check(0 < pbc.preset <= pbc.drain_threshold <= 1, "switch.preset",
            "need 0 < preset <= drain_threshold <= 1")

    lanes = r.get("link", "lanes", _int, d.link.lanes)
    gbps = r.get("link", "gbytes_per_lane", float, d.link.gbytes_per_lane)
    link_lat = r.get("link", "latency_ns", _ps, d.link.latency_ps)
    r.check(lanes > 0, "link.lanes", "must be > 0")
    r.check(gbps > 0, "link.gbytes_per_lane", "must be > 0")
    r.check(link_lat > 0, "link.latency_ns", "must be > 0")

    pm_range = AddressRange(r.get("devices", "pm_base", _int, dev.pm_range.base),
                            r.get("devices", "pm_size", _int, dev.pm_range.size))
    dram_range = AddressRange(r.get("devices", "dram_base", _int, dev.dram_range.base),
                              r.get("devices", "dram_size", _int, dev.dram_range.size))
    devices = DeviceTimings(r.get("devices", "pm_read_ns", _ps, dev.pm_read_ps),
                            r.get("devices", "pm_write_ns", _ps, dev.pm_write_ps),
                            r.get("devices", "dram_ns", _ps, dev.dram_ps),
                            pm_range, dram_range)
    for key, value in (("pm_read_ns", devices.pm_read_ps), ("pm_write_ns", devices.pm_write_ps),
                       ("dram_ns", devices.dram_ps)):
        r.check(value > 0, f"devices.{key}", "must be > 0")
    r.check(pm_range.size > 0, "devices.pm_size", "must be > 0")
    r.check(dram_range.size > 0, "devices.dram_size", "must be > 0")
    r.check(not pm_range.overlaps(dram_range), "devices.pm_base", "PM and DRAM ranges overlap")

    threads = r.get("host", "threads", _int, d.threads)
    op_gap = r.get("host", "op_gap_ns", _ps, d.op_gap_ps)
    r.check(threads >= 1, "host.threads", "must be >= 1")
    r.check(op_gap > 0, "host.op_gap_ns", "must be > 0")

    trace = r.get("trace", "source", str.strip, d.trace)
    if not trace.startswith("file:"):
        try:
            TraceSpec.parse(trace)
        except TraceError as exc:
            r.errors.append(("trace.source", str(exc)))

    seeds = r.get("run", "seeds", lambda s: [_int(x) for x in s.split(",") if x.strip()], d.seeds)
    schemes = r.get("run", "schemes", lambda s: [Scheme.parse(x) for x in s.split(",") if x.strip()],
                    d.schemes)
    out_dir = r.get("run", "out_dir", str.strip, d.out_dir)
    ceiling = r.get("run", "livelock_ceiling", _int, d.livelock_ceiling)
    r.check(bool(seeds), "run.seeds", "at least one seed required")
    r.check(bool(schemes), "run.schemes", "at least one scheme required")
    r.check(ceiling > 0, "run.livelock_ceiling", "must be > 0")

    background = Background(r.get("background", "rate_per_us", float, d.background.rate_per_us),
                            r.get("background", "count", _int, d.background.count))
    r.check(background.rate_per_us >= 0, "background.rate_per_us", "must be >= 0")
    r.check(background.count >= 0, "background.count", "must be >= 0")

    sensitivity = dict(d.sensitivity)
    if parser.has_section("sensitivity"):
        for key, raw in parser.items("sensitivity"):
            path = f"sensitivity.{key}"
            r.used.add(("sensitivity", key))
            try:
                if not key.startswith("pbe_"):
                    raise ValueError("keys are pbe_<count>")
                count = int(key[4:])
                tag, data = (_ps(x) for x in raw.split(","))
                if count < 1 or tag <= 0 or data <= 0:
                    raise ValueError("count and latencies must be positive")
                sensitivity[count] = (tag, data)
            except ValueError as exc:
                r.errors.append((path, f"expected 'tag_ns, data_ns' ({exc})"))

    for section in parser.sections():
        if section not in KNOWN_SECTIONS:
            r.errors.append((section, "unknown section"))
            continue
        for key in parser.options(section):
            if (section, key) not in r.used:
                r.errors.append((f"{section}.{key}", "unknown key"))

    if r.errors:
        raise ConfigError(r.errors)
    switch = SwitchConfig(scheme=scheme, stage_latency_ps=stage, pi_depth=pi_depth, po_depth=po_depth,
                          pbc_service_ps=service, pb=pbc, ack_priority=ack_priority)
    return ExperimentConfig(topology=topo, switch=switch, link=LinkConfig(lanes, gbps, link_lat),
                            devices=devices, threads=threads, op_gap_ps=op_gap, trace=trace,
                            seeds=seeds, schemes=schemes, background=background,
                            sensitivity=sensitivity, out_dir=out_dir, livelock_ceiling=ceiling)


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def validate_config(text: str) -> tuple[Optional[ExperimentConfig], list]:
    """Non-raising form: ``(config, [])`` or ``(None, diagnostics)``."""
    try:
        return parse_config(text), []
    except ConfigError as exc:
        return None, exc.diagnostics


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def _ns(ps: int) -> str:
    return str(ps // 1000) if ps % 1000 == 0 else repr(ps / 1000)


def emit_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` as text that parses back to an equal config."""
    sw, pb, dev = cfg.switch, cfg.switch.pb, cfg.devices
    out = configparser.ConfigParser()
    out["topology"] = {"switches": str(cfg.topology.switches), "persistent": cfg.topology.persistent}
    out["switch"] = {
        "scheme": sw.scheme.value, "stage_latency_ns": _ns(sw.stage_latency_ps),
        "pbc_service_ns": _ns(sw.pbc_service_ps), "pi_depth": str(sw.pi_depth), "po_depth": str(sw.po_depth),
        "ack_priority": str(sw.ack_priority).lower(), "pb_entries": str(pb.entries),
        "drain_threshold": repr(pb.drain_threshold), "preset": repr(pb.preset),
        "tag_access_ns": _ns(pb.tag_access_ps), "data_access_ns": _ns(pb.data_access_ps),
    }
    out["link"] = {"lanes": str(cfg.link.lanes), "gbytes_per_lane": repr(cfg.link.gbytes_per_lane),
                   "latency_ns": _ns(cfg.link.latency_ps)}
    out["devices"] = {
        "pm_read_ns": _ns(dev.pm_read_ps), "pm_write_ns": _ns(dev.pm_write_ps), "dram_ns": _ns(dev.dram_ps),
        "pm_base": hex(dev.pm_range.base), "pm_size": hex(dev.pm_range.size),
        "dram_base": hex(dev.dram_range.base), "dram_size": hex(dev.dram_range.size),
    }
    out["host"] = {"threads": str(cfg.threads), "op_gap_ns": _ns(cfg.op_gap_ps)}
    out["trace"] = {"source": cfg.trace}
    out["run"] = {"seeds": ", ".join(map(str, cfg.seeds)),
                  "schemes": ", ".join(s.value for s in cfg.schemes),
                  "out_dir": cfg.out_dir, "livelock_ceiling": str(cfg.livelock_ceiling)}
    out["background"] = {"rate_per_us": repr(cfg.background.rate_per_us), "count": str(cfg.background.count)}
    out["sensitivity"] = {f"pbe_{n}": f"{_ns(t)}, {_ns(dl)}" for n, (t, dl) in sorted(cfg.sensitivity.items())}
    lines = []
    for section in out.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in out[section].items())
        lines.append("")
    return "\n".join(lines)
