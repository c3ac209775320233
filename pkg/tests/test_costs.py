import math

import pytest
from hypothesis import given, strategies as st

from swamsim.core import App
from swamsim.costs import (LAYOUT_SHARE, LOOKUP_SHARE, CostConfig, SoProfile, XmlProfile,
                           estimate_so_cost, estimate_xml_cost, make_so_profile, make_xml_profile,
                           relaunch_cost, so_rebuild_cost)
from swamsim.rng import SplitMix64
from swamsim.workload import reference_scenario

times = st.floats(min_value=0, max_value=1e4, allow_nan=False)
profiles = st.builds(SoProfile, symbols=st.lists(st.tuples(times, times), max_size=30), load_ms=times)


def test_empty_symbols_is_load_time():
    assert estimate_so_cost(SoProfile(symbols=[], load_ms=5)) == 5


def test_single_symbol():
    assert estimate_so_cost(SoProfile(symbols=[(2, 1)], load_ms=5)) == 8


def test_xml_examples():
    assert estimate_xml_cost(XmlProfile(0, 0)) == 0
    assert estimate_xml_cost(XmlProfile(3, 22)) == 25


def test_relaunch_cost_examples():
    assert relaunch_cost(App(0), CostConfig(base_restart_ms=10)) == 10
    app = App(0, so_profile=SoProfile([(2, 1)], 5), xml_profile=XmlProfile(3, 22))
    assert relaunch_cost(app, CostConfig(base_restart_ms=10)) == 43


def test_relaunch_cost_weights():
    app = App(0, so_profile=SoProfile([(2, 1)], 5), xml_profile=XmlProfile(3, 22))
    assert relaunch_cost(app, CostConfig(base_restart_ms=0, so_weight=2, xml_weight=0.5)) == 28.5


def test_negative_times_rejected_with_index():
    with pytest.raises(ValueError, match=r"symbols\[1\]"):
        SoProfile(symbols=[(1, 1), (-1, 0)])
    with pytest.raises(ValueError):
        XmlProfile(-1, 0)


def test_generated_split_is_65_35():
    p = make_so_profile(SplitMix64(11), 500, 0.4, load_ms=3)
    lookup = sum(ts for ts, _ in p.symbols)
    reloc = sum(tr for _, tr in p.symbols)
    assert lookup / (lookup + reloc) == pytest.approx(0.65, abs=1e-4)
    assert reloc / (lookup + reloc) == pytest.approx(0.35, abs=1e-4)


def test_generated_xml_split_is_12_88():
    x = make_xml_profile(250)
    assert x.layout_alter_ms / (x.layout_alter_ms + x.render_ms) == pytest.approx(0.12)
    assert estimate_xml_cost(x) == pytest.approx(250)
    assert LAYOUT_SHARE + 0.88 == pytest.approx(1) and LOOKUP_SHARE == 0.65


@given(profiles)
def test_matches_straight_line_sum(p):
    total = p.load_ms
    for ts, tr in p.symbols:
        total = total + ts
        total = total + tr
    assert estimate_so_cost(p) == pytest.approx(total, rel=1e-12, abs=1e-9)


@given(profiles)
def test_linear_in_scale(p):
    doubled = SoProfile([(2 * a, 2 * b) for a, b in p.symbols], 2 * p.load_ms)
    assert estimate_so_cost(doubled) == pytest.approx(2 * estimate_so_cost(p), rel=1e-12, abs=1e-9)


@given(profiles, times, times)
def test_adding_a_symbol_never_decreases(p, ts, tr):
    more = SoProfile(p.symbols + [(ts, tr)], p.load_ms)
    assert estimate_so_cost(more) >= estimate_so_cost(p)


def test_rebuild_cost_is_pro_rata():
    p = SoProfile([(1, 1)] * 10, load_ms=20)  # 40 ms in total
    assert so_rebuild_cost(p, 5, 10) == pytest.approx(20)
    assert so_rebuild_cost(p, 10, 10) == pytest.approx(estimate_so_cost(p))
    assert so_rebuild_cost(p, 0, 10) == 0
    assert so_rebuild_cost(None, 3, 10) == 0


def test_reference_roster_cost_shape():
    cfg = reference_scenario()
    fg = [a for a in cfg.apps if a.role.value == "foreground"]
    costs = {a.name: relaunch_cost(App(0, so_profile=a.so_profile, xml_profile=a.xml_profile)) for a in fg}
    ranked = sorted(costs, key=costs.get)
    # games link the most libraries; the lean messaging client is cheapest
    assert set(ranked[-2:]) == {"game-1", "game-2"}
    assert ranked[0] == "messaging-1"
