import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcsim.config import ConfigError, ExperimentConfig, emit_config, parse_config, validate_config
from pcsim.persist_buffer import Scheme


def test_empty_file_gives_defaults():
    cfg = parse_config("")
    assert cfg == ExperimentConfig()
    assert cfg.topology.switches == 1 and cfg.topology.persistent_indices() == [0]
    assert cfg.devices.pm_read_ps == 100_000 and cfg.devices.pm_write_ps == 200_000
    assert cfg.switch.pb.entries == 16 and cfg.switch.pb.tag_access_ps == 388
    assert cfg.switch.pb.data_access_ps == 785


def test_zero_pm_write_latency_rejected_with_field_path():
    cfg, diags = validate_config("[devices]\npm_write_ns = 0\n")
    assert cfg is None and [p for p, _ in diags] == ["devices.pm_write_ns"]


def test_overlapping_ranges_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config("[devices]\npm_base = 0x1000\n")
    assert "overlap" in str(exc.value)


def test_every_problem_reported():
    _, diags = validate_config("[switch]\npi_depth = 0\nstage_latency_ns = -1\n[nope]\nx=1\n[host]\ncolour = red\n")
    paths = {p for p, _ in diags}
    assert {"switch.pi_depth", "switch.stage_latency_ns", "nope", "host.colour"} <= paths


def test_bad_values():
    _, diags = validate_config("[topology]\nswitches = two\n[run]\nschemes = NoPB, fast\n[trace]\nsource = zipf\n")
    assert {p for p, _ in diags} == {"topology.switches", "run.schemes", "trace.source"}


def test_persistent_switch_selection():
    cfg = parse_config("[topology]\nswitches = 3\npersistent = 1,3\n")
    assert cfg.topology.persistent_indices() == [0, 2]
    assert cfg.switch_config(1, Scheme.PB).scheme is Scheme.NOPB
    assert cfg.switch_config(2, Scheme.PB).scheme is Scheme.PB
    _, diags = validate_config("[topology]\nswitches = 2\npersistent = 5\n")
    assert diags[0][0] == "topology.persistent"


def test_zero_switches_means_local_pm():
    cfg = parse_config("[topology]\nswitches = 0\n")
    assert cfg.topology.persistent_indices() == []


def test_sub_nanosecond_values_kept_exact():
    cfg = parse_config("[switch]\ntag_access_ns = 0.388\n[sensitivity]\npbe_128 = 0.9, 1.5\n")
    assert cfg.switch.pb.tag_access_ps == 388
    assert cfg.sensitivity[128] == (900, 1500)


def test_round_trip_of_defaults_and_edits():
    text = "[topology]\nswitches = 4\npersistent = all\n[switch]\nscheme = PB_RF\npbc_service_ns = 1.25\n" \
           "[run]\nseeds = 3, 4\nschemes = PB\n[trace]\nsource = scan:ops=50\n[background]\nrate_per_us=2.5\ncount=10\n"
    cfg = parse_config(text)
    assert parse_config(emit_config(cfg)) == cfg
    assert emit_config(parse_config(emit_config(cfg))) == emit_config(cfg)


@settings(max_examples=60, deadline=None)
@given(stage=st.integers(1, 10**6), entries=st.integers(1, 256), write=st.integers(1, 10**7),
       threads=st.integers(1, 64), switches=st.integers(0, 6))
def test_round_trip_property(stage, entries, write, threads, switches):
    text = (f"[topology]\nswitches = {switches}\n[switch]\nstage_latency_ns = {stage / 1000}\n"
            f"pb_entries = {entries}\n[devices]\npm_write_ns = {write / 1000}\n[host]\nthreads = {threads}\n")
    cfg = parse_config(text)
    assert cfg.switch.stage_latency_ps == stage and cfg.devices.pm_write_ps == write
    assert parse_config(emit_config(cfg)) == cfg


def test_trace_spec_inherits_host_threads():
    cfg = parse_config("[host]\nthreads = 3\n[trace]\nsource = uniform:ops=30\n")
    assert cfg.trace_spec().threads == 3
