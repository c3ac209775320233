"""
Pages, apps and memory accounting
=================================

RAM holds resident pages plus the compressed bytes in ZRAM.  Utilization
is that total over RAM capacity.
"""

# %%
from swamsim.core import (GiB, MiB, PAGE_SIZE, App, MemoryState, PageKind, access, allocate,
                          share_so_page, utilization)
from swamsim.swap import SwapPath, swap_out

state = MemoryState(ram_capacity=64 * MiB, zram_capacity=16 * MiB, storage_capacity=1 * GiB)
state.add_app(App(id=0, name="camera"))
state.add_app(App(id=1, name="gallery"))

# %%
# Each app maps some library (SO) pages and some anonymous pages.
so = allocate(state, 0, 256, PageKind.SO)
anon = allocate(state, 0, 1024, PageKind.ANON)
print(f"utilization after camera starts: {utilization(state):.3f}")

# A library page can be mapped by a second app without using more memory.
share_so_page(state, so[0], 1)
print("page", so[0], "owners", sorted(state.page(so[0]).owners), "ref", state.page(so[0]).ref_count)

# %%
# Compressing a page into ZRAM costs ceil(4096 / 2.5) = 1639 bytes of RAM.
swap_out(state, anon[0], SwapPath.FAST_ZRAM, now=0)
print("zram physical bytes:", state.zram_stored_physical)
print(f"utilization now: {utilization(state):.4f}")

# %%
# Touching a compressed page faults it back in.
r = access(state, 0, anon[0], now=10)
print("fault:", r.fault, "latency ms:", r.latency_ms)
state.assert_invariants()
