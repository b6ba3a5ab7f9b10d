"""Where does a persist go, and how long does it take?

Run with ``python demos/01_persist_latency.py``.
"""

# %% [markdown]
# Without a persist buffer a fenced write must travel host -> switch -> PM and
# the ack must come all the way back.  With a persistent switch the write is
# acknowledged by the switch, and the trip to PM happens in the background.

# %%
import numpy as np

from pcsim import ExperimentConfig, Scheme, simulate
from pcsim.traces import persist_only

config = ExperimentConfig()
trace = persist_only(500, threads=1)

runs = {s: simulate(config, s, trace) for s in (Scheme.NOPB, Scheme.PB, Scheme.PB_RF)}
for s, st in runs.items():
    print(f"{s.value:6s} persist mean {st.persist_mean_ps / 1000:7.1f} ns   p99 {st.persist_p99_ps / 1000:7.1f} ns")

# %% [markdown]
# The ratio is fixed by the timing model: the switch round trip replaces the
# PM round trip, including the 200 ns PM write.

# %%
ratio = runs[Scheme.PB].persist_mean_ps / runs[Scheme.NOPB].persist_mean_ps
print(f"PB / NoPB persist latency = {ratio:.4f}")

# %% [markdown]
# Every persist took the same time, because a single thread with a fence
# after each write never queues behind anything.

# %%
st = runs[Scheme.PB]
print("spread of PB persist latencies (ps):", np.ptp([st.persist_p50_ps, st.persist_p99_ps]))
