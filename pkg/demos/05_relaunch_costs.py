"""
Relaunch cost estimates
=======================

Bringing an app back costs one symbol lookup and relocation per library
symbol plus the library load, and the XML layout work for its first
screen.  Apps with many symbols are the most expensive to kill.
"""

# %%
from swamsim.costs import CostConfig, estimate_so_cost, estimate_xml_cost, relaunch_cost
from swamsim.workload import reference_scenario

cfg = reference_scenario()
rows = []
for a in cfg.apps[:15]:
    rows.append((a.name, len(a.so_profile.symbols), estimate_so_cost(a.so_profile),
                 estimate_xml_cost(a.xml_profile), relaunch_cost(a, cfg.costs)))
for name, n, so, xml, total in sorted(rows, key=lambda r: r[-1]):
    print(f"{name:12s} {n:5d} symbols  SO {so:7.1f} ms  XML {xml:6.1f} ms  total {total:7.1f} ms")

# %%
# Weights let a scenario favour one component.
heavy = CostConfig(so_weight=2.0)
print("media-1 with double SO weight:", round(relaunch_cost(cfg.apps[0], heavy), 1), "ms")
