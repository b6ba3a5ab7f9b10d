"""Run statistics and the derived comparisons (speedup, normalized latency, rates)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np


@dataclass
class RunStats:
    scheme: str
    seed: int
    switches: int
    trace_hash: str
    total_time_ps: int = 0
    events: int = 0
    persist_count: int = 0
    persist_mean_ps: float = 0.0
    persist_p50_ps: int = 0
    persist_p99_ps: int = 0
    read_count: int = 0
    read_mean_ps: float = 0.0
    read_p50_ps: int = 0
    read_p99_ps: int = 0
    pb_read_hits: int = 0
    pb_read_lookups: int = 0
    rerouted_reads: int = 0
    coalesce_count: int = 0
    pm_write_count: int = 0
    pm_read_count: int = 0
    flush_count: int = 0
    live_pb_entries: int = 0
    stall_ps: int = 0
    stall_events: int = 0
    hol_blocked: int = 0
    pb_port_wait_ps: int = 0
    drains_per_switch: list = field(default_factory=list)
    pi_max_per_switch: list = field(default_factory=list)
    irrelevant_count: int = 0
    irrelevant_mean_ps: float = 0.0
    irrelevant_max_ps: int = 0
    irrelevant_hist: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def write_conservation_ok(self) -> bool:
        return self.coalesce_count + self.pm_write_count + self.live_pb_entries == self.flush_count

    def as_dict(self) -> dict:
        return asdict(self)


def summarize(samples) -> tuple[int, float, int, int]:
    """(count, mean, p50, p99); percentiles are the smallest sample whose rank covers p."""
    if len(samples) == 0:
        return 0, 0.0, 0, 0
    a = np.asarray(samples, dtype=np.int64)
    p50, p99 = np.percentile(a, [50, 99], method="inverted_cdf")
    return int(a.size), float(a.mean()), int(p50), int(p99)


def histogram(counter) -> dict:
    return {str(k): int(counter[k]) for k in sorted(counter)}


class ComparisonError(ValueError):
    pass


def _check_pair(baseline: RunStats, candidate: RunStats) -> None:
    if baseline.trace_hash != candidate.trace_hash:
        raise ComparisonError(
            f"runs used different traces ({baseline.trace_hash} vs {candidate.trace_hash})")
    if baseline.seed != candidate.seed or baseline.switches != candidate.switches:
        raise ComparisonError("runs differ in seed or topology")


def speedup(baseline: RunStats, candidate: RunStats) -> float:
    _check_pair(baseline, candidate)
    return baseline.total_time_ps / candidate.total_time_ps


def normalized_latency(stats: RunStats, baseline: RunStats) -> tuple[Optional[float], Optional[float]]:
    """(persist, read) mean-latency ratios against ``baseline``; None when a class is empty."""
    _check_pair(baseline, stats)
    persist = (stats.persist_mean_ps / baseline.persist_mean_ps
               if stats.persist_count and baseline.persist_count else None)
    read = (stats.read_mean_ps / baseline.read_mean_ps
            if stats.read_count and baseline.read_count else None)
    return persist, read


def hit_and_coalesce_rates(stats: RunStats) -> tuple[float, float]:
    hit = stats.pb_read_hits / stats.read_count if stats.read_count else 0.0
    coalesce = stats.coalesce_count / stats.flush_count if stats.flush_count else 0.0
    return hit, coalesce


def to_json(stats: RunStats) -> str:
    return json.dumps(stats.as_dict(), sort_keys=True, indent=2)


_TEXT_FIELDS = [
    ("scheme", "scheme", "{}"),
    ("total time (ns)", "total_time_ps", "{:.1f}", 1e-3),
    ("persists", "persist_count", "{}"),
    ("persist mean (ns)", "persist_mean_ps", "{:.2f}", 1e-3),
    ("persist p99 (ns)", "persist_p99_ps", "{:.2f}", 1e-3),
    ("reads", "read_count", "{}"),
    ("read mean (ns)", "read_mean_ps", "{:.2f}", 1e-3),
    ("PB read hits", "pb_read_hits", "{}"),
    ("PB read lookups", "pb_read_lookups", "{}"),
    ("flushes", "flush_count", "{}"),
    ("coalesces", "coalesce_count", "{}"),
    ("PM writes", "pm_write_count", "{}"),
    ("PI stall (ns)", "stall_ps", "{:.1f}", 1e-3),
    ("irrelevant pkts", "irrelevant_count", "{}"),
    ("events", "events", "{}"),
]


def to_text(stats: RunStats) -> str:
    rows = []
    for label, attr, fmt, *scale in _TEXT_FIELDS:
        value = getattr(stats, attr)
        if scale:
            value = value * scale[0]
        rows.append((label, fmt.format(value)))
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{label:<{width}}  {value:>14}" for label, value in rows) + "\n"


def table_text(header: list, rows: list) -> str:
    """Aligned-column rendering of a small comparison table."""
    cells = [[str(h) for h in header]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return "-" if value is None else str(value)
