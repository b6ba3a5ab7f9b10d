"""Discrete-event simulator of a CXL fabric whose switches can hold persist buffers."""

from .config import ConfigError, ExperimentConfig, Topology, emit_config, parse_config, validate_config
from .fabric import Channel, System, simulate
from .metrics import RunStats, hit_and_coalesce_rates, normalized_latency, speedup
from .oracle import CrashPlan, Oracle, check_crash, recover, verify_durability
from .persist_buffer import PbeState, PersistBuffer, Scheme
from .sim_core import Engine, make_rng
from .traces import TraceSpec, generate_trace, parse_trace

__all__ = [
    "ConfigError", "ExperimentConfig", "Topology", "emit_config", "parse_config", "validate_config",
    "Channel", "System", "simulate", "RunStats", "hit_and_coalesce_rates", "normalized_latency",
    "speedup", "CrashPlan", "Oracle", "check_crash", "recover", "verify_durability", "PbeState",
    "PersistBuffer", "Scheme", "Engine", "make_rng", "TraceSpec", "generate_trace", "parse_trace",
]
__version__ = "0.1.0"
