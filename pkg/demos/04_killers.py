"""
Killers
=======

LMKD kills by priority band, OOMK by size, EOOM by how cheap the victim is
to bring back.  The same roster can therefore lose very different apps.
"""

# %%
from swamsim.core import GiB, MiB, App, MemoryState, OomBand, allocate
from swamsim.costs import make_so_profile, make_xml_profile, relaunch_cost
from swamsim.killers import Killer, eoom_select, kill, lmkd_select, oomk_select
from swamsim.rng import SplitMix64

rng = SplitMix64(1)
state = MemoryState(ram_capacity=256 * MiB, zram_capacity=0, storage_capacity=1 * GiB)
roster = [("game", OomBand.CACHED, 3000, 300, 9000), ("notes", OomBand.CACHED, 120, 60, 3000),
          ("player", OomBand.SERVICE, 900, 260, 6000), ("launcher", OomBand.FOREGROUND, 400, 100, 2000)]
for i, (name, band, nsym, xml, pages) in enumerate(roster):
    state.add_app(App(id=i, name=name, oom_band=band, so_profile=make_so_profile(rng, nsym, 0.3, load_ms=5.0),
                      xml_profile=make_xml_profile(xml)))
    allocate(state, i, pages)

for a in state.apps.values():
    print(f"{a.name:9s} band {a.oom_band.name:10s} {state.owned_bytes(a.id) // MiB:3d} MiB  "
          f"relaunch {relaunch_cost(a):7.1f} ms")

# %%
print("LMKD picks", state.app(lmkd_select(state, util=0.85)).name)
print("OOMK picks", state.app(oomk_select(state)).name)
print("EOOM picks", state.app(eoom_select(state)).name)

# %%
ev = kill(state, eoom_select(state), Killer.EOOM, now=0)
print(ev.record())
