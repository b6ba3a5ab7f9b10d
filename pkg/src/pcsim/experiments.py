"""Canned experiments and the config-driven runner.

Each experiment returns an :class:`ExperimentResult`: a small comparison
table plus the raw :class:`RunStats` it was computed from.  Results are
plain data; :func:`write_result` renders them as CSV, JSON or text.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import fmean
from typing import Callable, Optional

from .config import ExperimentConfig, Topology
from .fabric import System
from .metrics import hit_and_coalesce_rates, normalized_latency, speedup, table_text
from .persist_buffer import Scheme
from .traces import TraceSpec, generate_trace, persist_only, read_trace

ALL_SCHEMES = (Scheme.NOPB, Scheme.PB, Scheme.PB_RF)


@dataclass
class ExperimentResult:
    name: str
    header: list
    rows: list
    runs: list = field(default_factory=list)
    notes: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "notes": self.notes, "header": self.header,
                "rows": [dict(zip(self.header, r)) for r in self.rows],
                "runs": [r.as_dict() for r in self.runs]}


def load_trace(config: ExperimentConfig, seed: int):
    spec = config.trace_spec()
    if spec is None:
        return read_trace(config.trace[len("file:"):])
    return generate_trace(spec, seed)


def run_config(config: ExperimentConfig, seeds: Optional[list] = None) -> ExperimentResult:
    """One run per (scheme, seed); speedup and normalized latency against NoPB when present."""
    seeds = seeds if seeds is not None else config.seeds
    runs, rows = [], []
    for seed in seeds:
        trace = load_trace(config, seed)
        by_scheme = {s: System(config, s, trace, seed).run() for s in config.schemes}
        runs.extend(by_scheme.values())
        base = by_scheme.get(Scheme.NOPB)
        for s, st in by_scheme.items():
            sp = speedup(base, st) if base else None
            pl, rl = normalized_latency(st, base) if base else (None, None)
            hit, co = hit_and_coalesce_rates(st)
            rows.append([seed, s.value, st.total_time_ps, sp, pl, rl, hit, co, len(st.violations)])
    header = ["seed", "scheme", "total_time_ps", "speedup", "norm_persist", "norm_read",
              "read_hit_rate", "coalesce_rate", "violations"]
    return ExperimentResult("run", header, rows, runs)


# -- canned experiments --------------------------------------------------

def hop_latency(config: Optional[ExperimentConfig] = None, seed: int = 0, persists: int = 200,
                max_switches: int = 4) -> ExperimentResult:
    """Persist latency vs number of switches on the path, normalized to local PM."""
    config = config or ExperimentConfig()
    trace = persist_only(persists, threads=1, base=config.devices.pm_range.base)
    local = System(replace(config, topology=Topology(0)), Scheme.NOPB, trace, seed).run()
    rows, runs = [], [local]
    for n in range(max_switches + 1):
        cfg = replace(config, topology=Topology(n, "first"))
        nopb = local if n == 0 else System(cfg, Scheme.NOPB, trace, seed).run()
        row = [n, nopb.persist_mean_ps, nopb.persist_mean_ps / local.persist_mean_ps]
        if n:
            pcs = System(cfg, Scheme.PB, trace, seed).run()
            runs.extend([nopb, pcs])
            row += [pcs.persist_mean_ps, pcs.persist_mean_ps / local.persist_mean_ps]
        else:
            row += [None, None]
        rows.append(row)
    header = ["switches", "nopb_persist_ps", "nopb_normalized", "pcs_first_persist_ps", "pcs_first_normalized"]
    return ExperimentResult("hops", header, rows, runs,
                            "single-thread persist-only trace; normalized to PM attached locally")


def scheme_latency(config: Optional[ExperimentConfig] = None, seed: int = 0,
                   trace_text: str = "hotset:ops=2000,locality=0.9") -> ExperimentResult:
    """Mean persist and read latency of each scheme, normalized to NoPB."""
    config = config or ExperimentConfig()
    trace = generate_trace(_spec(config, trace_text), seed)
    runs = {s: System(config, s, trace, seed).run() for s in ALL_SCHEMES}
    base = runs[Scheme.NOPB]
    rows = []
    for s, st in runs.items():
        pl, rl = normalized_latency(st, base)
        rows.append([s.value, st.persist_mean_ps, st.read_mean_ps, pl, rl])
    header = ["scheme", "persist_mean_ps", "read_mean_ps", "norm_persist", "norm_read"]
    return ExperimentResult("latency", header, rows, list(runs.values()), trace_text)


WORKLOADS = {
    "hotset-0.9": "hotset:ops=2000,locality=0.9",
    "hotset-0.5": "hotset:ops=2000,locality=0.5",
    "uniform": "uniform:ops=2000",
    "persist-heavy": "persist_heavy:ops=2000",
    "scan": "scan:ops=2000",
}


def _spec(config: ExperimentConfig, text: str) -> TraceSpec:
    spec = TraceSpec.parse(text)
    if "threads=" not in text:
        spec = replace(spec, threads=config.threads)
    return replace(spec, base=config.devices.pm_range.base)


def scheme_speedup(config: Optional[ExperimentConfig] = None, seeds=(0, 1, 2),
                   workloads: Optional[dict] = None) -> ExperimentResult:
    """Whole-run speedup of PB and PB_RF over NoPB, averaged over seeds."""
    config = config or ExperimentConfig()
    workloads = workloads or WORKLOADS
    rows, runs = [], []
    for name, text in workloads.items():
        ratios: dict = {Scheme.PB: [], Scheme.PB_RF: []}
        for seed in seeds:
            trace = generate_trace(_spec(config, text), seed)
            base = System(config, Scheme.NOPB, trace, seed).run()
            runs.append(base)
            for s in ratios:
                st = System(config, s, trace, seed).run()
                runs.append(st)
                ratios[s].append(speedup(base, st))
        rows.append([name, fmean(ratios[Scheme.PB]), fmean(ratios[Scheme.PB_RF])])
    return ExperimentResult("speedup", ["workload", "PB", "PB_RF"], rows, runs,
                            f"mean over seeds {list(seeds)}")


def rf_rates(config: Optional[ExperimentConfig] = None, seed: int = 0,
             workloads: Optional[dict] = None) -> ExperimentResult:
    """Read-hit and write-coalescing rates of PB_RF per workload."""
    config = config or ExperimentConfig()
    workloads = workloads or WORKLOADS
    rows, runs = [], []
    for name, text in workloads.items():
        st = System(config, Scheme.PB_RF, generate_trace(_spec(config, text), seed), seed).run()
        runs.append(st)
        hit, co = hit_and_coalesce_rates(st)
        rows.append([name, hit, co, st.pb_read_hits, st.read_count, st.coalesce_count, st.flush_count])
    header = ["workload", "read_hit_rate", "coalesce_rate", "pb_read_hits", "reads", "coalesces", "flushes"]
    return ExperimentResult("rates", header, rows, runs)


def pbe_sensitivity(config: Optional[ExperimentConfig] = None, seed: int = 0,
                    trace_text: str = "hotset:ops=2000,locality=0.9",
                    counts=(8, 16, 32, 64)) -> ExperimentResult:
    """Speedup over NoPB as the persist buffer grows (access latencies from the config table)."""
    config = config or ExperimentConfig()
    trace = generate_trace(_spec(config, trace_text), seed)
    base = System(config, Scheme.NOPB, trace, seed).run()
    rows, runs = [], [base]
    for n in counts:
        cfg = config.with_pb_entries(n)
        res = {s: System(cfg, s, trace, seed).run() for s in (Scheme.PB, Scheme.PB_RF)}
        runs.extend(res.values())
        tag, data = config.sensitivity[n]
        rows.append([n, tag, data, speedup(base, res[Scheme.PB]), speedup(base, res[Scheme.PB_RF])])
    header = ["pbe_count", "tag_access_ps", "data_access_ps", "PB", "PB_RF"]
    return ExperimentResult("pbe-sensitivity", header, rows, runs, trace_text)


EXPERIMENTS: dict[str, Callable[..., ExperimentResult]] = {
    "hops": hop_latency,
    "latency": scheme_latency,
    "speedup": scheme_speedup,
    "rates": rf_rates,
    "pbe-sensitivity": pbe_sensitivity,
}


def run_experiment(name: str, config: Optional[ExperimentConfig] = None, seed: int = 0) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}") from None
    if fn is scheme_speedup:
        return fn(config, seeds=(seed, seed + 1, seed + 2))
    return fn(config, seed=seed)


# -- output ----------------------------------------------------------------

def render(result: ExperimentResult, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(result.as_dict(), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(result.header)
        w.writerows(["" if c is None else c for c in row] for row in result.rows)
        return buf.getvalue()
    if fmt == "text":
        title = f"{result.name}" + (f"  ({result.notes})" if result.notes else "")
        return title + "\n" + table_text(result.header, result.rows)
    raise ValueError(f"unknown format {fmt!r}")


def write_result(result: ExperimentResult, out_dir, fmt: str = "text") -> list[Path]:
    """Always write CSV and JSON; add a text table when asked for text."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in ("csv", "json") + (("txt",) if fmt == "text" else ()):
        p = out / f"{result.name}.{f}"
        p.write_text(render(result, "text" if f == "txt" else f))
        paths.append(p)
    return paths
