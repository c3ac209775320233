import pytest
from hypothesis import given, settings, strategies as st

from swamsim.core import PAGE_SIZE, Role
from swamsim.workload import (DAY, HIGH_END, AppSpec, Event, EventKind, ScenarioConfig,
                              background_footprint, export_trace, generate, import_trace,
                              reference_scenario, trace_hash, trace_lines)


def test_single_idle_app_is_one_launch():
    cfg = ScenarioConfig(apps=[AppSpec("solo", role=Role.FOREGROUND, so_pages=1, access_rate=0.0)],
                         days=1)
    assert generate(cfg) == [Event(600 * 60_000, EventKind.LAUNCH, 0)]


def test_same_seed_same_bytes():
    a = trace_lines(generate(reference_scenario(seed=5, days=2)))
    b = trace_lines(generate(reference_scenario(seed=5, days=2)))
    c = trace_lines(generate(reference_scenario(seed=6, days=2)))
    assert a == b and a != c


@pytest.mark.parametrize("device", [None, HIGH_END])
def test_background_is_31_percent_of_ram(device):
    cfg = reference_scenario(device=device)
    frac = background_footprint(cfg) / cfg.device.ram
    assert frac == pytest.approx(0.31, abs=PAGE_SIZE / cfg.device.ram)


def test_roster_shape():
    cfg = reference_scenario()
    assert len(cfg.foreground()) == 15 and len(cfg.background()) == 25
    sharing = [a for a in cfg.apps if a.so_sharing_group is not None]
    assert len(sharing) / len(cfg.apps) == pytest.approx(0.08, abs=0.01)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_trace_strictly_ordered(seed):
    tr = generate(reference_scenario(seed=seed, days=2))
    assert all(a.time < b.time for a, b in zip(tr, tr[1:]))


def test_day_one_launches_cover_roster():
    cfg = reference_scenario(days=3)
    day1 = [e for e in generate(cfg) if e.time < DAY and e.kind is EventKind.LAUNCH]
    fg = {e.app for e in day1 if cfg.apps[e.app].role is Role.FOREGROUND}
    bg = [e for e in day1 if cfg.apps[e.app].role is Role.BACKGROUND]
    assert len(day1) == 40 and len(fg) == 15 and len(bg) == 25


def test_later_days_start_with_relaunch():
    tr = generate(reference_scenario(days=3))
    starts = [e for e in tr if e.kind is EventKind.RELAUNCH_KILLED]
    assert [e.time for e in starts] == [DAY, 2 * DAY]


def test_no_growth_inside_burst():
    cfg = reference_scenario(days=1)
    lo, hi = 600 * 60_000, (600 + cfg.burst_minutes) * 60_000
    assert not [e for e in generate(cfg) if e.kind is EventKind.GROWTH and lo <= e.time < hi]


def test_trace_round_trip(tmp_path):
    tr = generate(reference_scenario(days=2))
    h = export_trace(tr, tmp_path / "t.jsonl")
    back = import_trace(tmp_path / "t.jsonl")
    assert back == tr and trace_hash(back) == h
