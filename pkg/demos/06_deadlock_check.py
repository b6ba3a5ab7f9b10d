"""Exhaustive interleavings of the buffer protocol, with and without ack priority.

Run with ``python demos/06_deadlock_check.py``.
"""

# %% [markdown]
# A full buffer can only make room when a drain ack returns.  If acks had to
# queue behind writes in a bounded input buffer, a full buffer plus a full
# queue would wait forever.  The switch therefore lets acks bypass the
# request queue.  The model checker explores every ordering of arrivals,
# services, PM completions and ack deliveries for small write sequences.

# %%
from pcsim import Scheme
from pcsim.modelcheck import check_all, explore

for scheme in (Scheme.PB, Scheme.PB_RF):
    r = check_all(scheme, entries=2, writes=3)
    print(f"{scheme.value:6s} {r.states} states, {r.transitions} transitions, deadlocks: {len(r.deadlocks)}")

# %% [markdown]
# Negative control: put acks in the same FIFO as requests.

# %%
r = explore((0, 1, 2), Scheme.PB, entries=2, ack_priority=False)
print(f"FIFO acks: {len(r.deadlocks)} deadlocks")
tags, path, _ = r.deadlocks[0]
print("one path into it:", " -> ".join(path))
