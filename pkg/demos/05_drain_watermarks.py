"""The PB_RF drain policy, watched entry by entry.

Run with ``python demos/05_drain_watermarks.py``.
"""

# %% [markdown]
# With 16 entries, PB_RF starts draining when 13 are dirty (80%, rounded up)
# and keeps issuing drains until 10 are left (60%).  The transition log
# records every state change together with the dirty count after it.

# %%
from collections import Counter

from pcsim import ExperimentConfig, Scheme, System
from pcsim.traces import persist_only

sysm = System(ExperimentConfig(), Scheme.PB_RF, persist_only(200), record_transitions=True)
st = sysm.run()

bursts = {}
for t in sysm.transitions:
    if t.old == "Dirty" and t.new == "Drain" and t.time < st.total_time_ps:
        start, _ = bursts.get(t.time, (t.dirty + 1, None))
        bursts[t.time] = (start, t.dirty)
print("(dirty before burst, dirty after burst):", Counter(bursts.values()))

# %% [markdown]
# The dirty count over the first few microseconds, as a sawtooth.

# %%
shown = 0
for t in sysm.transitions:
    if t.new in ("Dirty", "Drain") and shown < 40:
        print(f"{t.time / 1000:9.1f} ns  {t.old:>6} -> {t.new:<6} dirty={t.dirty:2d} {'|' * t.dirty}")
        shown += 1
