"""Whole-run speedup of the two persist-buffer schemes over no buffer.

Run with ``python demos/03_schemes_on_workloads.py`` (about a minute).
"""

# %% [markdown]
# PB captures writes and drains them to PM as soon as the PM path is free.
# PB_RF holds them dirty, serves reads from the buffer and coalesces repeat
# writes, draining only when the dirty count crosses a watermark.  Neither is
# uniformly better: eager draining keeps free entries, lazy draining saves
# PM bandwidth on hot lines.

# %%
from pcsim.experiments import render, rf_rates, scheme_speedup

print(render(scheme_speedup(seeds=(0, 1)), "text"))

# %% [markdown]
# The payoff of holding data is visible in PB_RF's read-hit and coalescing
# rates, which rise with locality.

# %%
print(render(rf_rates(), "text"))

# %% [markdown]
# A hot line written 100 times, with a fence after every write, shows the
# extreme case.

# %%
from pcsim import ExperimentConfig, Scheme, simulate
from pcsim.traces import hot_line

for s in (Scheme.PB, Scheme.PB_RF):
    st = simulate(ExperimentConfig(), s, hot_line(100))
    print(f"{s.value:6s} PM writes {st.pm_write_count:4d}  coalesced {st.coalesce_count:4d}")
