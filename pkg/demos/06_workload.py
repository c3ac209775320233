"""
Workloads and traces
====================

The reference roster has 15 foreground and 25 background apps.  Each day
the background apps grow while the phone idles, and a 90-minute burst
visits every foreground app.  A seed fixes the whole trace.
"""

# %%
import tempfile
from collections import Counter
from pathlib import Path

from swamsim.workload import (DAY, background_footprint, export_trace, generate, import_trace,
                              reference_scenario)

cfg = reference_scenario(seed=42, days=3)
print(f"background footprint: {background_footprint(cfg) / cfg.device.ram:.1%} of RAM")
trace = generate(cfg)
for d in range(cfg.days):
    kinds = Counter(e.kind.value for e in trace if d * DAY <= e.time < (d + 1) * DAY)
    print(f"day {d + 1}:", dict(kinds))

# %%
with tempfile.TemporaryDirectory() as tmp:
    digest = export_trace(trace, Path(tmp) / "trace.jsonl")
    same = import_trace(Path(tmp) / "trace.jsonl") == trace
print("sha256", digest[:16], "... round trip ok:", same)
