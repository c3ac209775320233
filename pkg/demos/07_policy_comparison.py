"""
Comparing policies
==================

All four policies replay the same trace.  A few days are enough to see
the pattern; ``swamsim compare`` on scenarios/reference_low_end.json runs
the full four weeks.
"""

# %%
import numpy as np

from swamsim.core import MiB
from swamsim.engine import replay
from swamsim.workload import Policy, generate, reference_scenario

cfg = reference_scenario(seed=42, days=4)
trace = generate(cfg)
print(f"{'policy':10s} {'kills':>5s} {'launch ms':>10s} {'response ms':>12s} {'free MiB/day':>14s}")
for p in Policy:
    m = replay(trace, cfg, p)
    free = " ".join(f"{x / MiB:5.0f}" for x in m.daily_free())
    print(f"{p.value:10s} {len(m.kills):5d} {m.mean_launch_ms():10.1f} {m.mean_response_ms():12.2f}   {free}")
