"""Command-line entry point.

    pcsim run <config>               simulate every (scheme, seed) in the config
    pcsim gen-trace <spec> <out>     write a synthetic trace file
    pcsim check <config>             crash-sweep and ordering verification
    pcsim experiment <name>          canned experiment (hops, latency, speedup, rates, pbe-sensitivity)

Exit status: 0 success, 1 configuration/input error, 2 correctness failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, parse_config
from .experiments import EXPERIMENTS, load_trace, render, run_config, run_experiment, write_result
from .fabric import System
from .metrics import to_json, to_text
from .sim_core import SimulationError
from .traces import TraceError, TraceSpec, format_trace, generate_trace

EXIT_OK, EXIT_CONFIG, EXIT_VERDICT = 0, 1, 2


def _load(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([(path, exc.strerror or str(exc))]) from None
    return parse_config(text)


def _seeds(args, config: ExperimentConfig) -> list:
    return [args.seed] if args.seed is not None else list(config.seeds)


def cmd_run(args) -> int:
    config = _load(args.config)
    out = Path(args.out_dir or config.out_dir)
    result = run_config(config, _seeds(args, config))
    out.mkdir(parents=True, exist_ok=True)
    for st in result.runs:
        (out / f"stats_{st.scheme}_seed{st.seed}.json").write_text(to_json(st) + "\n")
    write_result(result, out, args.format)
    if args.format == "json":
        sys.stdout.write(render(result, "json"))
    elif args.format == "csv":
        sys.stdout.write(render(result, "csv"))
    else:
        for st in result.runs:
            sys.stdout.write(f"--- {st.scheme} seed {st.seed}\n{to_text(st)}")
        sys.stdout.write(render(result, "text"))
    bad = sum(len(st.violations) for st in result.runs)
    if bad:
        print(f"{bad} ordering violation(s) recorded", file=sys.stderr)
        return EXIT_VERDICT
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    spec = TraceSpec.parse(args.spec)
    seed = args.seed if args.seed is not None else 0
    ops = generate_trace(spec, seed)
    Path(args.out).write_text(format_trace(ops, f"{spec.describe()} seed={seed}"))
    print(f"wrote {len(ops)} trace records to {args.out}")
    return EXIT_OK


def cmd_check(args) -> int:
    config = _load(args.config)
    records, failed = [], False
    for seed in _seeds(args, config):
        trace = load_trace(config, seed)
        for scheme in config.schemes:
            sweep = System(config, scheme, trace, seed).crash_sweep(args.max_points)
            stats = System(config, scheme, trace, seed).run()
            final_ok = stats.live_pb_entries == 0 and stats.write_conservation_ok
            ok = sweep.ok and not stats.violations and final_ok
            failed |= not ok
            records.append({
                "scheme": scheme.value, "seed": seed, "ok": ok, "crash_points": sweep.points,
                "crash_failures": [v.as_record() for v in sweep.failures[:5]],
                "order_violations": stats.violations[:5], "final_drain_ok": final_ok,
            })
    if args.format == "json":
        print(json.dumps(records, sort_keys=True, indent=2))
    else:
        for r in records:
            status = "PASS" if r["ok"] else "FAIL"
            print(f"{status} {r['scheme']:<6} seed={r['seed']:<4} crash points={r['crash_points']:<6} "
                  f"crash failures={len(r['crash_failures'])} order violations={len(r['order_violations'])}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "check.json").write_text(json.dumps(records, sort_keys=True, indent=2) + "\n")
    return EXIT_VERDICT if failed else EXIT_OK


def cmd_experiment(args) -> int:
    config = _load(args.config) if args.config else None
    result = run_experiment(args.name, config, args.seed if args.seed is not None else 0)
    out = Path(args.out_dir or (config.out_dir if config else "results"))
    write_result(result, out, args.format)
    sys.stdout.write(render(result, args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcsim", description="Persistent CXL switch fabric simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config's seed list")
    common.add_argument("--out-dir", default=None, help="directory for result files")
    common.add_argument("--format", choices=("json", "csv", "text"), default="text")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="simulate a configuration")
    r.add_argument("config")
    r.set_defaults(fn=cmd_run)

    g = sub.add_parser("gen-trace", parents=[common], help="generate a synthetic trace")
    g.add_argument("spec", help="e.g. hotset:ops=1000,locality=0.9")
    g.add_argument("out")
    g.set_defaults(fn=cmd_gen_trace)

    c = sub.add_parser("check", parents=[common], help="crash-sweep and ordering verification")
    c.add_argument("config")
    c.add_argument("--max-points", type=int, default=5000, help="crash after each of the first N events")
    c.set_defaults(fn=cmd_check)

    e = sub.add_parser("experiment", parents=[common], help="run a canned experiment")
    e.add_argument("name", choices=sorted(EXPERIMENTS))
    e.add_argument("--config", default=None, help="base configuration (defaults if omitted)")
    e.set_defaults(fn=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        for path, msg in exc.diagnostics:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
