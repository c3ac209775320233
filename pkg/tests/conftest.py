import numpy as np
import pytest

from swamsim.core import GiB, MiB, App, MemoryState, OomBand, PageKind, Role, allocate


def make_state(ram=64 * MiB, zram=16 * MiB, storage=1 * GiB, other=0, nand=0, ratio=2.5, swap_cfg=None):
    return MemoryState(ram_capacity=ram, zram_capacity=zram, storage_capacity=storage,
                       storage_used_other=other, compression_ratio=ratio, nand_capacity=nand,
                       swap_cfg=swap_cfg)


def add_app(state, app_id, **kw):
    return state.add_app(App(id=app_id, name=kw.pop("name", f"app{app_id}"), **kw))


@pytest.fixture
def state():
    return make_state()


@pytest.fixture
def two_apps(state):
    add_app(state, 0)
    add_app(state, 1, role=Role.FOREGROUND, oom_band=OomBand.FOREGROUND)
    return state


def populate(state, rng, n_apps=5, max_pages=40, now=1_000_000):
    """Random apps with random SO/ANON pages, history and sharing."""
    for a in range(n_apps):
        add_app(state, a, time_critical=bool(rng.integers(2)), oom_band=OomBand(int(rng.integers(6))))
        for kind in (PageKind.SO, PageKind.ANON):
            k = int(rng.integers(1, max_pages))
            allocate(state, a, k, kind, now=0)
    n = state._n
    state._last[:n] = now - rng.integers(0, 200_000, n)
    state._acc[:n] = rng.integers(0, 10, n)
    state._siao[:n] = rng.random(n) < 0.3
    return now


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
