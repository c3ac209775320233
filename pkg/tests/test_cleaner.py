import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import add_app, make_state
from swamsim.cleaner import (CleanerConfig, NothingToClean, active_isop_interval, isop_tick,
                             so_erase, so_erase_order, storage_free_fraction)
from swamsim.core import (GiB, MiB, PAGE_SIZE, AppState, Location, PageKind, PreconditionError,
                          allocate, share_so_page)
from swamsim.swap import SwapPath, swap_in, swap_out


def _zram_so(state, owner, acc, sharers=()):
    (p,) = allocate(state, owner, 1, PageKind.SO)
    for a in sharers:
        share_so_page(state, p, a)
    swap_out(state, p, SwapPath.FAST_ZRAM, 0)
    state._acc[state._idx1(p)] = acc
    return p


def test_so_erase_order_example():
    s = make_state()
    for a in range(9):
        add_app(s, a)
    p51 = _zram_so(s, 0, 5)
    p53 = _zram_so(s, 0, 5, sharers=(1, 2))
    p29 = _zram_so(s, 0, 2, sharers=range(1, 9))
    assert s._id[so_erase_order(s)].tolist() == [p29, p51, p53]
    # the whole set is dropped when asked for more than it holds
    assert so_erase(s, 10 * PAGE_SIZE, 5) == [p29, p51, p53]
    assert all(s.page(p).location is Location.NOT_PRESENT for p in (p29, p51, p53))
    assert s.zram_stored_physical == 0


def test_so_erase_zero_bytes(state):
    assert so_erase(state, 0, 0) == []


def test_so_erase_nothing_to_clean(two_apps):
    (p,) = allocate(two_apps, 0, 1, PageKind.SO)
    swap_out(two_apps, p, SwapPath.SLOW_SWAM, 0)
    with pytest.raises(NothingToClean):
        so_erase(two_apps, PAGE_SIZE, 0)


def _random_zram(seed, n=300):
    rng = np.random.default_rng(seed)
    s = make_state(ram=64 * MiB, zram=32 * MiB)
    for a in range(6):
        add_app(s, a)
    for _ in range(n):
        owner = int(rng.integers(6))
        others = [a for a in range(6) if a != owner]
        sharers = rng.choice(others, size=int(rng.integers(0, 4)), replace=False).tolist()
        _zram_so(s, owner, int(rng.integers(0, 6)), sharers)
    # distractors: resident SO and ZRAM ANON pages are never candidates
    allocate(s, 0, 20, PageKind.SO)
    for p in allocate(s, 1, 20, PageKind.ANON):
        swap_out(s, p, SwapPath.FAST_ZRAM, 0)
    return s


@pytest.mark.parametrize("seed", range(4))
def test_so_erase_matches_sort_oracle(seed):
    s = _random_zram(seed)
    pages = [s.page(int(p)) for p in s._id[: s._n]]
    cand = sorted((p for p in pages if p.kind is PageKind.SO and p.location is Location.ZRAM),
                  key=lambda p: (p.access_count, p.ref_count, p.id))
    assert len(cand) == 300
    need = 37 * PAGE_SIZE
    # oracle: shortest prefix whose removal frees ``need`` physical bytes
    logical = s.zram_stored_logical
    phys0 = int(np.ceil(logical / 2.5))
    k = 0
    while True:
        k += 1
        if phys0 - int(np.ceil((logical - k * PAGE_SIZE) / 2.5)) >= need:
            break
    before = s.zram_stored_physical
    got = so_erase(s, need, 10)
    assert got == [p.id for p in cand[:k]]
    assert s.zram_stored_physical < before
    assert s.check_invariants() == []


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2000))
def test_so_erase_only_touches_zram_so(seed, need_pages):
    s = _random_zram(seed, n=60)
    zram_so = set(s._id[s.live_indices(Location.ZRAM, PageKind.SO)].tolist())
    states = {a.id: a.state for a in s.apps.values()}
    got = so_erase(s, need_pages * PAGE_SIZE, 1)
    assert got and set(got) <= zram_so
    assert {a.id: a.state for a in s.apps.values()} == states


def _file_with_age(state, app, now, age):
    (p,) = allocate(state, app, 1, PageKind.SO)
    swap_out(state, p, SwapPath.SLOW_SWAM, 0)
    f = state.swam_files[state.page(p).file_id]
    f.last_swap_in = now - age
    return f.id, p


def test_isop_threshold_split():
    cfg = CleanerConfig()
    s = make_state()
    s.swap_cfg.swam_file_capacity = 1
    add_app(s, 0)
    now = 10 * cfg.isop_cold_threshold
    old, p_old = _file_with_age(s, 0, now, 2 * cfg.isop_cold_threshold)
    new, p_new = _file_with_age(s, 0, now, cfg.isop_cold_threshold // 2)
    assert isop_tick(s, now, cfg) == [old]
    assert s.page(p_old).location is Location.NOT_PRESENT
    assert s.page(p_new).location is Location.SWAM_FILE


def test_isop_watermark_deletes_coldest_until_free():
    cfg = CleanerConfig()
    # storage of 100 pages, 89 used elsewhere; 10 one-page files leave 1% free
    s = make_state(storage=100 * PAGE_SIZE, other=89 * PAGE_SIZE)
    s.swap_cfg.swam_file_capacity = 1
    add_app(s, 0)
    now = 1_000_000
    files = [_file_with_age(s, 0, now, 1000 - k)[0] for k in range(10)]  # all warm
    assert storage_free_fraction(s) == pytest.approx(0.01)
    assert active_isop_interval(s, cfg) == cfg.isop_fast_interval
    log = []
    got = isop_tick(s, now, cfg, log)
    assert got == files[:9]  # oldest last_swap_in first, until 10% free
    assert storage_free_fraction(s) >= cfg.storage_low_watermark
    assert active_isop_interval(s, cfg) == cfg.isop_interval
    assert log[0].record()["ids"] == files[:9]


def test_isop_no_files(state):
    assert isop_tick(state, 10**9) == []


def test_isop_keeps_anon_files():
    s = make_state()
    add_app(s, 0)
    (p,) = allocate(s, 0, 1, PageKind.ANON)
    swap_out(s, p, SwapPath.SLOW_SWAM, 0)
    assert isop_tick(s, 10**10) == []


def test_deleted_so_page_reloads_with_rebuild_cost():
    from swamsim.costs import SoProfile, so_rebuild_cost
    s = make_state()
    prof = SoProfile(symbols=[(1.0, 2.0)] * 10, load_ms=5.0)
    add_app(s, 0, so_profile=prof)
    ids = allocate(s, 0, 4, PageKind.SO)
    swap_out(s, ids[0], SwapPath.FAST_ZRAM, 0)
    so_erase(s, 1, 0)
    ms = swap_in(s, ids[0], 1)
    assert ms == pytest.approx(s.swap_cfg.slow_in_ms + so_rebuild_cost(prof, 1, 4))


@pytest.mark.parametrize("kw", [dict(isop_fast_interval=10 * 60_000), dict(storage_low_watermark=0.0),
                                dict(storage_low_watermark=1.0)])
def test_config_rejects(kw):
    with pytest.raises(PreconditionError):
        CleanerConfig(**kw)
