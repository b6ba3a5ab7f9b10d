"""Pull the plug anywhere: acknowledged data must survive.

Run with ``python demos/04_crash_recovery.py``.
"""

# %% [markdown]
# A crash keeps PM and the persist buffers and drops everything else: packets
# on links, input queues, the host.  Recovery writes the buffered lines back
# to PM.  The oracle then checks that every acknowledged version is present
# and that nothing appears that was never sent.

# %%
from pcsim import CrashPlan, ExperimentConfig, Scheme, System, check_crash, generate_trace, TraceSpec

config = ExperimentConfig()
trace = generate_trace(TraceSpec.parse("persist_heavy:ops=800"), seed=5)

sysm = System(config, Scheme.PB_RF, trace, seed=5)
state = sysm.run_to_crash(CrashPlan(after_events=3000, on_marker=False))
print(f"crashed at t={state.time} ps after {state.events} events")
print(f"lines in PM: {len(state.pm)}, buffered lines: {[len(b) for b in state.buffers]}")
print("verdict:", check_crash(state).ok)

# %% [markdown]
# Checking every event boundary: the run is deterministic, so the sweep
# inspects the state in place after each event instead of re-simulating.

# %%
for scheme in (Scheme.NOPB, Scheme.PB, Scheme.PB_RF):
    sweep = System(config, scheme, trace, seed=5).crash_sweep(max_points=5000)
    print(f"{scheme.value:6s} {sweep.points} crash points, {len(sweep.failures)} failures")
