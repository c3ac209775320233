"""
Adaptive Swap
=============

SO pages are swapped before anything else, ranked in four tiers.  Private
SO pages go to swam files on flash (they can be reloaded from the library),
shared ones to ZRAM.  Swam files are created on demand and removed once
empty.
"""

# %%
import numpy as np

from swamsim.core import GiB, KiB, MiB, App, MemoryState, PageKind, allocate, share_so_page
from swamsim.swap import adaptive_swap_step, rank_so_victims, unmap_cost

state = MemoryState(ram_capacity=64 * MiB, zram_capacity=16 * MiB, storage_capacity=1 * GiB)
for i, crit in enumerate([False, True, False]):
    state.add_app(App(id=i, name=f"app{i}", time_critical=crit))
    allocate(state, i, 40, PageKind.SO, now=0)
    allocate(state, i, 120, PageKind.ANON, now=0)
share_so_page(state, 1, 2)

# make the first ten pages stale and the rest fresh
now = 500_000
state._last[: state._n] = now
state._last[:10] = 0

# %%
ranks = rank_so_victims(state, now)
tiers = np.bincount([r.tier for r in ranks], minlength=5)[1:]
print("SO victims per tier 1..4:", tiers.tolist())
print("first five victims:", [(r.page, r.tier) for r in ranks[:5]])

# %%
# Free 200 pages' worth: all 120 SO pages go first, then the oldest normal pages.
events = adaptive_swap_step(state, now, 200 * 4096)
for e in events:
    print(f"{e.path.value:10s} {e.n_pages:4d} pages  {e.latency_ms:.3f} ms")
print("swam files:", {f.id: f.n_pages for f in state.swam_files.values()})

# %%
# Unmapping in bigger units means fewer checks for a pending high-priority task.
for unit in (32 * KiB, 4 * MiB):
    checks, ms = unmap_cost(100 * MiB, unit)
    print(f"unit {unit // KiB:5d} KiB: {checks:5d} checks, {ms:.2f} ms")
