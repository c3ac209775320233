"""Brute-force reference implementations used by the unit and acceptance tests."""

import functools
from types import SimpleNamespace

import numpy as np

from conftest import add_app, make_state
from swamsim.core import (MiB, PAGE_SIZE, Location, OomBand, PageKind, allocate, share_so_page)
from swamsim.costs import SoProfile, XmlProfile, relaunch_cost
from swamsim.swap import SwapPath, swap_out

FLAGS = ("batch", "root", "hardware", "init")


def pages_of(state):
    """Snapshot of every live page, read straight from the page table."""
    n = state._n
    out = []
    for i in range(n):
        if state._loc[i] == 5:
            continue
        out.append(SimpleNamespace(
            id=int(state._id[i]), kind=PageKind(int(state._kind[i])),
            owners=frozenset(state.owners_of_index(i)), ref_count=int(state._ref[i]),
            last_access=int(state._last[i]), access_count=int(state._acc[i]),
            location=Location(int(state._loc[i])), swapped_in_after_out=bool(state._siao[i])))
    return out


def tier(p, now, cfg):
    if now - p.last_access > cfg.recency_window:
        return 1
    if p.ref_count < cfg.ref_count_threshold:
        return 2
    if p.swapped_in_after_out:
        return 3
    return 4


def ranking(state, now, cfg):
    pages = pages_of(state)
    per_app = {}
    for p in pages:
        if p.kind is PageKind.SO and p.location is Location.RESIDENT:
            for a in p.owners:
                per_app[a] = per_app.get(a, 0) + PAGE_SIZE
    cand = [p for p in pages if p.kind is PageKind.SO and p.location is Location.RESIDENT]

    def cmp(a, b):
        ta, tb = tier(a, now, cfg), tier(b, now, cfg)
        if ta != tb:
            return ta - tb
        if ta == 4:
            ka = max(per_app[o] for o in a.owners)
            kb = max(per_app[o] for o in b.owners)
            if ka != kb:
                return kb - ka
        return a.id - b.id

    return [p.id for p in sorted(cand, key=functools.cmp_to_key(cmp))]


def so_erase_order(state):
    cand = [p for p in pages_of(state) if p.kind is PageKind.SO and p.location is Location.ZRAM]
    return [p.id for p in sorted(cand, key=lambda p: (p.access_count, p.ref_count, p.id))]


def _owned(state):
    out = {a: 0 for a in state.apps}
    for p in pages_of(state):
        for a in p.owners:
            out[a] += PAGE_SIZE
    return out


def lmkd(state):
    owned = _owned(state)
    cands = [a for a in state.apps.values() if a.running and a.oom_band > OomBand.PERSISTENT]
    if not cands:
        return None
    top = max(a.oom_band for a in cands)
    cands = [a for a in cands if a.oom_band == top]
    big = max(owned[a.id] for a in cands)
    return min(a.id for a in cands if owned[a.id] == big)


def oomk(state):
    owned = _owned(state)
    by_size = sorted((a for a in state.apps.values() if a.running), key=lambda a: (-owned[a.id], a.id))
    left = [a for a in by_size if not any(getattr(a, f) for f in FLAGS)]
    if not left:
        return None
    top = max(a.oom_band for a in left)
    return next(a.id for a in left if a.oom_band == top)


def eoom(state):
    owned = _owned(state)
    elig = [a for a in state.apps.values() if a.running and not any(getattr(a, f) for f in FLAGS)]
    if not elig:
        return None
    cost = {a.id: relaunch_cost(a) for a in elig}
    best = min(cost.values())
    ties = [a for a in elig if cost[a.id] == best]
    big = max(owned[a.id] for a in ties)
    return min(a.id for a in ties if owned[a.id] == big)


def random_instance(seed, max_pages=1000, max_apps=50):
    """A state with up to ``max_apps`` apps and ``max_pages`` pages in every location."""
    rng = np.random.default_rng(seed)
    s = make_state(ram=64 * MiB, zram=16 * MiB)
    n_apps = int(rng.integers(2, max_apps + 1))
    budget = int(rng.integers(n_apps * 2, max_pages + 1))
    sizes = rng.multinomial(budget - 2 * n_apps, np.ones(n_apps) / n_apps) + 2
    for a in range(n_apps):
        flags = {f: bool(rng.random() < 0.1) for f in FLAGS}
        nsym = int(rng.integers(1, 6))
        add_app(s, a, oom_band=OomBand(int(rng.integers(6))), time_critical=bool(rng.integers(2)),
                so_profile=SoProfile([(float(rng.integers(0, 40)), float(rng.integers(0, 5)))] * nsym,
                                     load_ms=float(rng.integers(0, 10))),
                xml_profile=XmlProfile(float(rng.integers(0, 300)), 5.0), **flags)
        k = int(sizes[a])
        so = int(rng.integers(1, k))
        allocate(s, a, so, PageKind.SO, now=0)
        allocate(s, a, k - so, PageKind.ANON, now=0)
    n = s._n
    now = 1_000_000
    s._last[:n] = now - rng.integers(0, 200_000, n)
    s._acc[:n] = rng.integers(0, 8, n)
    s._siao[:n] = rng.random(n) < 0.3
    so_ids = s._id[:n][s._kind[:n] == PageKind.SO]
    for pid in rng.choice(so_ids, size=len(so_ids) // 5, replace=False).tolist():
        others = [a for a in s.apps if a not in s.owners_of_index(s._idx1(pid))]
        for a in rng.choice(others, size=min(len(others), int(rng.integers(1, 4))), replace=False).tolist():
            share_so_page(s, pid, a)
    for pid in rng.choice(so_ids, size=len(so_ids) // 3, replace=False).tolist():
        swap_out(s, pid, SwapPath.FAST_ZRAM, 0)
    return s, now
