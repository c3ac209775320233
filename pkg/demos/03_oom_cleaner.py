"""
OOM Cleaner
===========

Instead of killing an app, drop SO pages from ZRAM (SO Eraser) and delete
cold swam files of SO pages (ISOP Eraser).  Both only lose data that can
be rebuilt from the library files, at the price of a slower next access.
"""

# %%
from swamsim.cleaner import CleanerConfig, active_isop_interval, isop_tick, so_erase, so_erase_order
from swamsim.core import GiB, MiB, App, MemoryState, PageKind, allocate, share_so_page
from swamsim.costs import SoProfile
from swamsim.swap import SwapPath, swap_in, swap_out

state = MemoryState(ram_capacity=64 * MiB, zram_capacity=16 * MiB, storage_capacity=1 * GiB)
prof = SoProfile(symbols=[(0.3, 0.05)] * 400, load_ms=8.0)
for i in range(3):
    state.add_app(App(id=i, so_profile=prof))
pages = allocate(state, 0, 12, PageKind.SO)
for p in pages[:4]:
    share_so_page(state, p, 1)
for k, p in enumerate(pages[:8]):
    swap_out(state, p, SwapPath.FAST_ZRAM, 0)
    state._acc[state._idx1(p)] = k % 3

# %%
order = so_erase_order(state)
print("erase order (access, ref):", list(zip(state._acc[order].tolist(), state._ref[order].tolist())))
dropped = so_erase(state, 8_000, now=1)
print("dropped", len(dropped), "pages; zram now", state.zram_stored_physical, "bytes")
print(f"reload cost of one dropped page: {swap_in(state, dropped[0], 2):.2f} ms")

# %%
# ISOP: files with no swap-in for 30 minutes are deleted.
cfg = CleanerConfig()
swap_out(state, pages[10], SwapPath.SLOW_SWAM, now=0)
print("interval now:", active_isop_interval(state, cfg) // 60_000, "min")
print("deleted files:", isop_tick(state, now=40 * 60_000, cfg=cfg))
