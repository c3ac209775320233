import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import add_app, make_state
from swamsim.core import (MiB, PAGE_SIZE, AppState, Location, OomBand, PageKind, allocate,
                          share_so_page)
from swamsim.costs import SoProfile, XmlProfile
from swamsim.killers import (AlreadyKilled, Killer, SystemPanic, eoom_select, kill, lmkd_select,
                             oomk_select)
from swamsim.swap import SwapPath, swap_out

FLAGS = ("batch", "root", "hardware", "init")


def test_lmkd_prefers_cached(state):
    add_app(state, 0, oom_band=OomBand.FOREGROUND)
    add_app(state, 1, oom_band=OomBand.CACHED)
    allocate(state, 0, 50)
    allocate(state, 1, 5)
    assert lmkd_select(state, util=0.85) == 1


def test_lmkd_no_apps_or_below_threshold(state):
    assert lmkd_select(state, util=0.95) is None
    add_app(state, 0)
    assert lmkd_select(state, util=0.5) is None


def _roster(seed, n=20):
    rng = np.random.default_rng(seed)
    s = make_state(ram=256 * MiB, zram=0)
    for a in range(n):
        flags = {f: bool(rng.random() < 0.15) for f in FLAGS}
        add_app(s, a, oom_band=OomBand(int(rng.integers(6))), **flags,
                so_profile=SoProfile(symbols=[(float(rng.integers(0, 50)), 1.0)] * 3),
                xml_profile=XmlProfile(float(rng.integers(0, 400)), 10.0))
        allocate(s, a, int(rng.integers(1, 6)) * 8)  # sizes collide on purpose
    return s


def _eligible(s):
    return [a for a in s.apps.values() if a.running and not any(getattr(a, f) for f in FLAGS)]


@pytest.mark.parametrize("seed", range(6))
def test_lmkd_matches_sort_oracle(seed):
    s = _roster(seed)
    rows = sorted(((-int(a.oom_band), -s.owned_bytes(a.id), a.id) for a in s.apps.values()
                   if a.oom_band > OomBand.PERSISTENT))
    assert lmkd_select(s, util=0.81) == (rows[0][2] if rows else None)


def test_oomk_prefers_larger(state):
    add_app(state, 0)
    add_app(state, 1)
    allocate(state, 0, 100 * MiB // PAGE_SIZE // 4)
    allocate(state, 1, 50 * MiB // PAGE_SIZE // 4)
    assert oomk_select(state) == 0


def test_oomk_panics_when_all_excluded(state):
    for i, f in enumerate(FLAGS):
        add_app(state, i, **{f: True})
    with pytest.raises(SystemPanic):
        oomk_select(state)
    with pytest.raises(SystemPanic):
        eoom_select(state)


@pytest.mark.parametrize("seed", range(6))
def test_oomk_matches_three_step_oracle(seed):
    s = _roster(seed)
    # 1: biggest first; 2: drop protected apps; 3: most killable band first
    by_size = sorted(s.apps.values(), key=lambda a: (-s.owned_bytes(a.id), a.id))
    left = [a for a in by_size if not (a.batch or a.root or a.hardware or a.init)]
    top = max(a.oom_band for a in left)
    expected = next(a.id for a in left if a.oom_band == top)
    assert oomk_select(s) == expected


def test_eoom_picks_cheapest(state):
    add_app(state, 1)
    add_app(state, 2)
    assert eoom_select(state, {1: 900.0, 2: 150.0}) == 2


def test_eoom_single_candidate(state):
    add_app(state, 4)
    assert eoom_select(state, {4: 1.0}) == 4


@pytest.mark.parametrize("seed", range(6))
def test_eoom_matches_argmin(seed):
    from swamsim.costs import relaunch_cost
    s = _roster(seed, n=15)
    elig = _eligible(s)
    costs = {a.id: relaunch_cost(a) for a in s.apps.values()}
    best = min(costs[a.id] for a in elig)
    ties = [a for a in elig if costs[a.id] == best]
    big = max(s.owned_bytes(a.id) for a in ties)
    expected = min(a.id for a in ties if s.owned_bytes(a.id) == big)
    assert eoom_select(s) == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_eoom_scale_invariant(seed, k):
    s = _roster(seed % 1000, n=15)
    if not _eligible(s):
        return
    rng = np.random.default_rng(seed)
    costs = {a: float(rng.integers(1, 20)) for a in s.apps}
    assert eoom_select(s, costs) == eoom_select(s, {a: c * k for a, c in costs.items()})


def test_kill_frees_resident(two_apps):
    allocate(two_apps, 0, 3)
    before = two_apps.resident_bytes
    ev = kill(two_apps, 0, Killer.LMKD, 7)
    assert two_apps.resident_bytes == before - 12288
    assert ev.bytes_reclaimed == 12288 and ev.time == 7
    assert two_apps.app(0).state is AppState.KILLED and two_apps.app(0).kills == 1


def test_kill_shared_page_survives(two_apps):
    (p,) = allocate(two_apps, 0, 1, PageKind.SO)
    share_so_page(two_apps, p, 1)
    kill(two_apps, 0, Killer.EOOM, 0)
    pg = two_apps.page(p)
    assert pg.ref_count == 1 and pg.owners == {1}
    assert two_apps.check_invariants() == []


def test_kill_across_locations_conserves():
    s = make_state(ram=4 * MiB, zram=1 * MiB)
    add_app(s, 0)
    add_app(s, 1)
    ids = allocate(s, 0, 30)
    keep = allocate(s, 1, 10)
    for p in ids[:10]:
        swap_out(s, p, SwapPath.FAST_ZRAM, 0)
    for p in ids[10:20]:
        swap_out(s, p, SwapPath.SLOW_SWAM, 0)
    swap_out(s, keep[0], SwapPath.SLOW_SWAM, 0)
    kill(s, 0, Killer.OOMK, 1)
    assert s.resident_bytes == 9 * PAGE_SIZE
    assert s.zram_stored_physical == 0
    assert s.swam_bytes == PAGE_SIZE
    assert s.live_pages == 10
    assert s.check_invariants() == []
    # nothing anywhere still names the killed app
    live = s._loc[: s._n] != 5
    assert 0 not in s._owner[: s._n][live]
    assert all(0 not in o for o in s._owners.values())


def test_kill_twice_rejected(two_apps):
    kill(two_apps, 1, Killer.LMKD, 0)
    with pytest.raises(AlreadyKilled):
        kill(two_apps, 1, Killer.LMKD, 1)


def test_killed_app_not_selected_again(two_apps):
    kill(two_apps, 0, Killer.LMKD, 0)
    assert lmkd_select(two_apps, util=0.9) == 1
