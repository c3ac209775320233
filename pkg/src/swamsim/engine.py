"""Discrete-event loop and per-policy reclamation chains.

Before any event maps new memory (allocation, growth or swap-in) the
engine projects utilization with the new pages included and runs the
policy's stages in order:

* baselines: LRU swap to ZRAM and/or the NAND partition, then LMKD, then OOMK
* SWAM: Adaptive Swap, then the OOM Cleaner, then the EOOM Killer

A stage triggers when projected utilization reaches its threshold and
works down to ``threshold - hysteresis``.  If the pages still would not
fit in RAM the last killer keeps going regardless of threshold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import cleaner as cl
from .core import (_FREED, PAGE_SIZE, App, AppState, Location, MemoryState, PageKind, Role,
                   share_so_pages)
from .costs import relaunch_cost
from .killers import Killer, KillEvent, SystemPanic, eoom_select, kill, lmkd_select, oomk_select
from .rng import uniform_stream
from .swap import (StorageFull, SwapEvent, SwapPath, SwapPolicyConfig, ZramFull, _swap_in_rows,
                   adaptive_swap_step, baseline_swap_step, stage_unmap_ms)
from .workload import DAY, Event, EventKind, Policy, ScenarioConfig, growth_pages

log = logging.getLogger("swamsim")

_RAM_LOCS = (Location.RESIDENT, Location.ZRAM)


@dataclass
class PolicyChain:
    policy: Policy
    stages: tuple[str, ...]

    @classmethod
    def for_policy(cls, policy: Policy) -> "PolicyChain":
        stages = {
            Policy.NAND_SWAP: ("swap:nand", "lmkd", "oomk"),
            Policy.ZRAM: ("swap:zram", "lmkd", "oomk"),
            Policy.ZRAM_NAND: ("swap:zram+nand", "lmkd", "oomk"),
            Policy.SWAM: ("swap:adaptive", "cleaner", "eoom"),
        }[Policy(policy)]
        return cls(Policy(policy), stages)

    @property
    def uses_zram(self) -> bool:
        return self.policy is not Policy.NAND_SWAP

    @property
    def uses_nand(self) -> bool:
        return self.policy in (Policy.NAND_SWAP, Policy.ZRAM_NAND)


@dataclass
class MetricsLog:
    policy: Policy
    days: int
    records: list[dict] = field(default_factory=list)
    kills: list[KillEvent] = field(default_factory=list)
    launches: list[tuple[int, int, float, bool]] = field(default_factory=list)  # (t, app, ms, cold)
    responses: list[tuple[int, int, float]] = field(default_factory=list)       # (t, app, ms)
    samples: list[tuple[int, int]] = field(default_factory=list)                # (t, free bytes)
    day_end: list[tuple[int, int]] = field(default_factory=list)                # (zram phys, swap storage)
    hits: int = 0
    faults: int = 0
    violations: list[tuple[int, str]] = field(default_factory=list)
    panic: str | None = None
    panic_time: int | None = None
    ram: int = 0

    @property
    def first_kill_time(self) -> float:
        return float(self.kills[0].time) if self.kills else math.inf

    def daily_free(self) -> np.ndarray:
        """Time-weighted mean free bytes per day (free memory is constant between events)."""
        out = np.zeros(self.days)
        if not self.samples:
            return out + self.ram
        t = np.array([s[0] for s in self.samples], dtype=np.float64)
        f = np.array([s[1] for s in self.samples], dtype=np.float64)
        for d in range(self.days):
            a, b = d * DAY, (d + 1) * DAY
            # value in force at each point of [a, b)
            i0 = int(np.searchsorted(t, a, side="right")) - 1
            i1 = int(np.searchsorted(t, b, side="left"))
            bounds = [a] + [x for x in t[max(i0 + 1, 0):i1]] + [b]
            vals = [f[i0] if i0 >= 0 else self.ram] + list(f[max(i0 + 1, 0):i1])
            dur = np.diff(bounds)
            out[d] = float(np.dot(dur, vals)) / DAY
        return out

    def collapse_day(self, thresholds) -> int | None:
        """First day (0-based) whose mean free memory sinks into the LMKD band."""
        limit = (1 - thresholds.lmkd + thresholds.hysteresis) * self.ram
        hit = np.flatnonzero(self.daily_free() <= limit)
        return int(hit[0]) if len(hit) else None

    def mean_launch_ms(self) -> float:
        return float(np.mean([x[2] for x in self.launches])) if self.launches else 0.0

    def mean_response_ms(self) -> float:
        return float(np.mean([x[2] for x in self.responses])) if self.responses else 0.0


class Engine:
    """One scenario under one policy."""

    def __init__(self, cfg: ScenarioConfig, policy: Policy | str | None = None,
                 check_invariants: bool = False) -> None:
        self.cfg = cfg
        self.chain = PolicyChain.for_policy(policy or cfg.policy)
        dev = cfg.device
        swap_cfg = SwapPolicyConfig(**{**cfg.swap.__dict__, "storage_read_bw": dev.read_bw,
                                       "storage_write_bw": dev.write_bw})
        self.swap_cfg = swap_cfg
        self.state = MemoryState(
            ram_capacity=dev.ram,
            zram_capacity=dev.zram_cap if self.chain.uses_zram else 0,
            storage_capacity=dev.storage,
            storage_used_other=dev.storage_used_other,
            compression_ratio=dev.compression_ratio,
            nand_capacity=dev.nand_swap if self.chain.uses_nand else 0,
            swap_cfg=swap_cfg,
        )
        self.check = check_invariants
        self.clock = 0
        self.metrics = MetricsLog(self.chain.policy, cfg.days, ram=dev.ram)
        self._groups: dict[int, list[int]] = {}
        self._next_isop = cfg.cleaner.isop_interval
        self._emitted: list[dict] = []

    # ------------------------------------------------------------ helpers
    @property
    def swam(self) -> bool:
        return self.chain.policy is Policy.SWAM

    def _emit(self, rec: dict) -> None:
        self._emitted.append(rec)

    def _projected(self, extra: int) -> float:
        return (self.state.used_bytes + extra) / self.state.ram_capacity

    def _ram_pages(self) -> int:
        return int(self.state.counts[Location.RESIDENT] + self.state.counts[Location.ZRAM])

    def _unit(self) -> int:
        return self.swap_cfg.unmap_unit if self.swam else self.swap_cfg.baseline_unmap_unit

    def _swap_latency(self, events: list[SwapEvent]) -> float:
        lat = 0.0
        for e in events:
            self._emit(e.record())
            lat += e.latency_ms
        n = sum(e.n_pages for e in events)
        return lat + (stage_unmap_ms(n * PAGE_SIZE, self._unit(), self.swap_cfg) if n else 0.0)

    # ------------------------------------------------------------- stages
    def _need(self, extra: int, thr: float) -> int:
        target = (thr - self.cfg.thresholds.hysteresis) * self.state.ram_capacity
        return max(0, int(math.ceil(self.state.used_bytes + extra - target)))

    def _swap_stage(self, extra: int, exclude: np.ndarray | None) -> float:
        need = self._need(extra, self.cfg.thresholds.swap)
        st, now = self.state, self.clock
        if not self.swam:
            evs = baseline_swap_step(st, now, need, self.chain.uses_zram, self.chain.uses_nand,
                                     self.swap_cfg, exclude)
            return self._swap_latency(evs)
        lat, spill = 0.0, False
        for _ in range(4):
            try:
                lat += self._swap_latency(adaptive_swap_step(st, now, need, self.swap_cfg, exclude, spill))
                break
            except ZramFull as e:
                lat += self._swap_latency(e.events)
                lat += self._so_erase(self._need(extra, self.cfg.thresholds.swap))
                spill = True
            except StorageFull as e:
                lat += self._swap_latency(e.events)
                if not self._isop():
                    break
            need = self._need(extra, self.cfg.thresholds.swap)
            if need <= 0:
                break
        return lat

    def _so_erase(self, need: int) -> float:
        if need <= 0:
            return 0.0
        before = self.state.zram_stored_physical
        try:
            ids = cl.so_erase(self.state, need, self.clock)
        except cl.NothingToClean:
            return 0.0
        self._emit(cl.CleanRecord(self.clock, "so", ids, before - self.state.zram_stored_physical,
                                  len(ids)).record())
        return 0.0  # dropping file-backed pages needs no I/O

    def _isop(self) -> bool:
        rec: list = []
        deleted = cl.isop_tick(self.state, self.clock, self.cfg.cleaner, rec)
        for r in rec:
            self._emit(r.record())
        return bool(deleted)

    def _kill(self, app: int, killer: Killer) -> float:
        before = self._ram_pages()
        ev = kill(self.state, app, killer, self.clock, self.cfg.costs)
        self.metrics.kills.append(ev)
        self._emit(ev.record())
        log.info("t=%d %s killed %s", self.clock, killer.value, self.cfg.apps[app].name)
        freed = before - self._ram_pages()
        return stage_unmap_ms(freed * PAGE_SIZE, self._unit(), self.swap_cfg)

    def _kill_stage(self, extra: int, exclude_app: int | None) -> float:
        th = self.cfg.thresholds
        ram = self.state.ram_capacity
        excl = () if exclude_app is None else (exclude_app,)
        lat = 0.0
        fits = lambda: self.state.used_bytes + extra <= ram  # noqa: E731
        if not self.swam and self._projected(extra) >= th.lmkd:
            while self._projected(extra) >= th.lmkd - th.hysteresis:
                v = lmkd_select(self.state, 1.0, threshold=0.0, exclude=excl)
                if v is None:
                    break
                lat += self._kill(v, Killer.LMKD)
        if self._projected(extra) >= th.oomk or not fits():
            killer = Killer.EOOM if self.swam else Killer.OOMK
            while self._projected(extra) >= th.oomk - th.hysteresis or not fits():
                if self.swam:
                    v = eoom_select(self.state, exclude=excl, cost_cfg=self.cfg.costs)
                else:
                    v = oomk_select(self.state, exclude=excl)
                lat += self._kill(v, killer)
        return lat

    def make_room(self, extra: int, exclude_rows: np.ndarray | None = None,
                  exclude_app: int | None = None) -> float:
        """Run the escalation chain so ``extra`` more bytes can be mapped; returns stall ms."""
        th = self.cfg.thresholds
        lat = 0.0
        if self._projected(extra) >= th.swap:
            lat += self._swap_stage(extra, exclude_rows)
            if self.swam and self._projected(extra) >= th.swap:
                lat += self._so_erase(self._need(extra, th.swap))
        lat += self._kill_stage(extra, exclude_app)
        return lat

    # ------------------------------------------------------------- events
    def _spec(self, app: int):
        return self.cfg.apps[app]

    def _cold_launch(self, app: int) -> float:
        spec = self._spec(app)
        st = self.state
        if app in st.apps:
            a = st.apps[app]
            a.state = AppState.RUNNING
            a.relaunches += 1
        else:
            a = st.add_app(App(id=app, name=spec.name, role=spec.role, oom_band=spec.oom_band,
                               time_critical=spec.time_critical, so_profile=spec.so_profile,
                               xml_profile=spec.xml_profile, batch=spec.batch, root=spec.root,
                               hardware=spec.hardware, init=spec.init))
        g = spec.so_sharing_group if spec.shared_so_pages > 0 else None
        # room for a fresh pool too: reclaim may kill the members holding the old one
        n = spec.so_pages + spec.anon_pages + (spec.shared_so_pages if g is not None else 0)
        lat = self.make_room(n * PAGE_SIZE, exclude_app=app)
        pool = [p for p in self._groups.get(g, []) if self._live(p)] if g is not None else []
        new_pool = g is not None and not pool
        now = self.clock
        if spec.so_pages:
            st._alloc(app, spec.so_pages, PageKind.SO, now)
        if spec.anon_pages:
            st._alloc(app, spec.anon_pages, PageKind.ANON, now)
        if new_pool:
            idx = st._alloc(app, spec.shared_so_pages, PageKind.SO, now)
            self._groups[g] = st._id[idx].tolist()
        else:
            share_so_pages(st, pool, app)
        return relaunch_cost(a, self.cfg.costs) + lat

    def _live(self, pid: int) -> bool:
        i = int(np.searchsorted(self.state._id[: self.state._n], pid))
        return i < self.state._n and self.state._id[i] == pid and self.state._loc[i] != _FREED

    def _touch(self, app: int, rows: np.ndarray) -> tuple[float, int]:
        """Access ``rows`` on behalf of ``app``: faults are swapped in. Returns (ms, faults)."""
        st = self.state
        rows, cnt = np.unique(rows, return_counts=True)
        miss = rows[st._loc[rows] != Location.RESIDENT]
        lat = 0.0
        if len(miss):
            nz = int(np.count_nonzero(st._loc[miss] == Location.ZRAM))
            extra = len(miss) * PAGE_SIZE - (st.zram_stored_physical
                                             - st.compressed_size(st.zram_stored_logical - nz * PAGE_SIZE))
            lat += self.make_room(extra, exclude_rows=rows, exclude_app=app)
            lat += _swap_in_rows(st, miss, self.clock, app, self.swap_cfg)
        st._touch(rows, self.clock, cnt)
        self.metrics.faults += len(miss)
        self.metrics.hits += int(cnt.sum()) - len(miss)
        return lat, len(miss)

    def _sample_rows(self, app: int, n: int, salt: int) -> np.ndarray:
        rows = self.state.app_indices(app)
        if len(rows) == 0 or n <= 0:
            return rows[:0]
        u = uniform_stream(salt, n) ** self.cfg.workload.access_skew
        return rows[np.minimum((u * len(rows)).astype(np.int64), len(rows) - 1)]

    def _launch(self, ev: Event, user: bool = True) -> None:
        st = self.state
        a = st.apps.get(ev.app)
        if a is None or not a.running:
            ms, cold = self._cold_launch(ev.app), True
            faults = 0
        else:
            rows = st.app_indices(ev.app)
            k = int(round(len(rows) * self.cfg.workload.launch_touch_fraction))
            ms, faults = self._touch(ev.app, self._sample_rows(ev.app, k, ev.time ^ (ev.app << 32)))
            cold = False
        self.metrics.launches.append((ev.time, ev.app, ms, cold))
        if user and self._spec(ev.app).role is Role.FOREGROUND:
            # switching to an app is the first input of its session
            self.metrics.responses.append((ev.time, ev.app, ms))
        self._emit({"t": ev.time, "type": "launch", "app": ev.app, "cold": cold,
                    "faults": faults, "latency_ms": round(ms, 6)})

    def _interact(self, ev: Event) -> None:
        a = self.state.apps.get(ev.app)
        if a is None or not a.running:  # can only happen with hand-written traces
            self._launch(Event(ev.time, EventKind.LAUNCH, ev.app))
        ms, faults = self._touch(ev.app, self._sample_rows(ev.app, ev.n, ev.salt))
        self.metrics.responses.append((ev.time, ev.app, ms))
        if faults:
            self._emit({"t": ev.time, "type": "fault", "app": ev.app, "faults": faults,
                        "latency_ms": round(ms, 6)})

    def _growth(self, ev: Event) -> None:
        st = self.state
        for app in sorted(st.apps):
            a = st.apps[app]
            spec = self._spec(app)
            if not a.running or spec.role is not Role.BACKGROUND:
                continue
            n = min(growth_pages(spec, ev.n), spec.cap_pages - st.own_page_count(app))
            if n <= 0:
                continue
            self.make_room(n * PAGE_SIZE, exclude_app=app)
            if st.apps[app].running:
                st._alloc(app, n, PageKind.ANON, self.clock)

    def _relaunch_killed(self, ev: Event) -> None:
        for app in sorted(self.state.apps):
            if not self.state.apps[app].running:
                self._launch(Event(ev.time, EventKind.LAUNCH, app), user=False)

    def _isop_until(self, t: int) -> None:
        if not self.swam:
            return
        while self._next_isop <= t:
            saved, self.clock = self.clock, self._next_isop
            self._isop()
            self.clock = saved
            self._next_isop += cl.active_isop_interval(self.state, self.cfg.cleaner)

    def step(self, ev: Event) -> list[dict]:
        """Apply one event; returns the records it produced."""
        if ev.time < self.clock:
            raise ValueError(f"event at {ev.time} precedes clock {self.clock}")
        self._emitted = []
        self._isop_until(ev.time)
        self.clock = ev.time
        if ev.kind is EventKind.LAUNCH:
            self._launch(ev)
        elif ev.kind is EventKind.INTERACT:
            self._interact(ev)
        elif ev.kind is EventKind.GROWTH:
            self._growth(ev)
        elif ev.kind is EventKind.RELAUNCH_KILLED:
            self._relaunch_killed(ev)
        self.state.maybe_compact()
        self.metrics.samples.append((ev.time, self.state.free_bytes))
        if self.check:
            for v in self.state.check_invariants():
                self.metrics.violations.append((ev.time, v))
        self.metrics.records.extend(self._emitted)
        return self._emitted

    def run(self, trace: list[Event]) -> MetricsLog:
        day = 0
        for ev in trace:
            while ev.time >= (day + 1) * DAY and day < self.cfg.days:
                self._end_day()
                day += 1
            try:
                self.step(ev)
            except SystemPanic as e:
                self.metrics.records.extend(self._emitted)
                self.metrics.panic, self.metrics.panic_time = str(e), ev.time
                self.metrics.records.append({"t": ev.time, "type": "panic", "reason": str(e)})
                log.warning("system panic at t=%d: %s", ev.time, e)
                break
        while len(self.metrics.day_end) < self.cfg.days:
            self._end_day()
        return self.metrics

    def _end_day(self) -> None:
        st = self.state
        self.metrics.day_end.append((st.zram_stored_physical, st.swam_bytes + st.nand_used))


def run(cfg: ScenarioConfig, trace: list[Event], policy: Policy | str | None = None,
        check_invariants: bool = False) -> MetricsLog:
    return Engine(cfg, policy, check_invariants).run(trace)


def replay(trace: list[Event], cfg: ScenarioConfig, policy: Policy | str | None = None,
           check_invariants: bool = False) -> MetricsLog:
    """Drive a fresh engine built from ``cfg`` over a (possibly imported) trace."""
    return run(cfg, trace, policy, check_invariants)
