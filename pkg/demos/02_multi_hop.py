"""Persist latency as switches are added between host and memory.

Run with ``python demos/02_multi_hop.py``.
"""

# %% [markdown]
# Each extra switch adds two link traversals and two switch pipelines to the
# round trip.  When the first switch on the path is persistent, the ack comes
# from there, so the number of downstream hops stops mattering.

# %%
from pcsim.experiments import hop_latency, render

result = hop_latency(persists=200)
print(render(result, "text"))

# %% [markdown]
# The same numbers as a simple bar chart, normalized to PM attached locally.

# %%
for n, _, nopb, _, pcs in result.rows:
    bar = "#" * int(round(nopb * 8))
    print(f"{n} switches  NoPB {nopb:5.2f} {bar}")
    if pcs is not None:
        print(f"            PCS  {pcs:5.2f} {'#' * int(round(pcs * 8))}")
