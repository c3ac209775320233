"""Scenario description and seeded trace generation.

A scenario is a device, a roster of apps and a daily routine: background
apps start at boot and grow slowly while the phone is idle, and once a day
the user goes through every foreground app in a burst of interaction.
Killed apps are brought back at the start of the next day.

Traces are plain lists of :class:`Event` and round-trip through a JSON
Lines file; the sha256 of that file identifies a trace.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .cleaner import CleanerConfig
from .core import GiB, MiB, OomBand, PAGE_SIZE, Role
from .costs import CostConfig, SoProfile, XmlProfile, make_so_profile, make_xml_profile
from .rng import SplitMix64
from .swap import SwapPolicyConfig

MINUTE = 60_000
DAY = 24 * 60 * MINUTE


class Policy(str, Enum):
    NAND_SWAP = "NAND_SWAP"
    ZRAM = "ZRAM"
    ZRAM_NAND = "ZRAM_NAND"
    SWAM = "SWAM"


class EventKind(str, Enum):
    LAUNCH = "launch"
    INTERACT = "interact"
    GROWTH = "growth"          # every running background app grows by ``n`` minutes' worth
    RELAUNCH_KILLED = "relaunch_killed"


@dataclass(frozen=True)
class Event:
    time: int
    kind: EventKind
    app: int = -1
    n: int = 0       # accesses for INTERACT, minutes for GROWTH
    salt: int = 0    # seeds the access pattern of an INTERACT

    def record(self) -> dict:
        return {"t": self.time, "kind": self.kind.value, "app": self.app, "n": self.n,
                "salt": self.salt}

    @classmethod
    def from_record(cls, r: dict) -> "Event":
        return cls(int(r["t"]), EventKind(r["kind"]), int(r["app"]), int(r["n"]), int(r["salt"]))


@dataclass
class DeviceConfig:
    ram: int = 4 * GiB
    storage: int = 64 * GiB
    zram_cap: int = 512 * MiB
    nand_swap: int = 2 * GiB
    storage_used_other: int = 48 * GiB
    compression_ratio: float = 2.5
    read_bw: float = 2.1e6   # bytes/ms
    write_bw: float = 1.2e6


LOW_END = DeviceConfig()
HIGH_END = DeviceConfig(ram=8 * GiB, storage=128 * GiB, zram_cap=1 * GiB, nand_swap=3 * GiB,
                        storage_used_other=100 * GiB)


@dataclass
class AppSpec:
    name: str
    role: Role = Role.BACKGROUND
    working_set_mb: float = 0.0        # growth cap; 0 means the initial footprint
    so_pages: int = 0
    anon_pages: int = 0
    so_sharing_group: int | None = None
    shared_so_pages: int = 0           # size of the group's common SO pool
    so_profile: SoProfile | None = None
    xml_profile: XmlProfile | None = None
    access_rate: float = 5.0           # accesses per second while in use
    background_growth_kb_per_min: float = 50.0
    oom_band: OomBand = OomBand.CACHED
    time_critical: bool = False
    batch: bool = False
    root: bool = False
    hardware: bool = False
    init: bool = False
    category: str = ""

    @property
    def initial_pages(self) -> int:
        return self.so_pages + self.anon_pages

    @property
    def cap_pages(self) -> int:
        cap = int(self.working_set_mb * MiB) // PAGE_SIZE
        return max(cap, self.initial_pages)


@dataclass
class WorkloadConfig:
    burst_start_minute: int = 600       # 10:00
    idle_tick_minutes: int = 30
    interact_period_s: int = 30
    launch_touch_fraction: float = 0.25
    access_skew: float = 2.0            # >1 concentrates accesses on an app's oldest pages


@dataclass
class Thresholds:
    swap: float = 0.60
    lmkd: float = 0.80
    oomk: float = 0.90
    hysteresis: float = 0.05


@dataclass
class ScenarioConfig:
    device: DeviceConfig = field(default_factory=DeviceConfig)
    apps: list[AppSpec] = field(default_factory=list)
    days: int = 28
    burst_minutes: int = 90
    seed: int = 42
    policy: Policy = Policy.SWAM
    swap: SwapPolicyConfig = field(default_factory=SwapPolicyConfig)
    cleaner: CleanerConfig = field(default_factory=CleanerConfig)
    costs: CostConfig = field(default_factory=CostConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)

    def foreground(self) -> list[int]:
        return [i for i, a in enumerate(self.apps) if a.role is Role.FOREGROUND]

    def background(self) -> list[int]:
        return [i for i, a in enumerate(self.apps) if a.role is Role.BACKGROUND]


# ------------------------------------------------------------------ traces
def generate(cfg: ScenarioConfig) -> list[Event]:
    """The event trace of ``cfg``; a pure function of the config."""
    rng = SplitMix64(cfg.seed)
    wl = cfg.workload
    fg, bg = cfg.foreground(), cfg.background()
    burst0 = wl.burst_start_minute
    burst1 = burst0 + cfg.burst_minutes
    grows = any(cfg.apps[i].background_growth_kb_per_min > 0 for i in bg)
    period = wl.interact_period_s * 1000
    slot = cfg.burst_minutes * MINUTE // len(fg) if fg else 0

    events: list[Event] = []
    for day in range(cfg.days):
        t0 = day * DAY
        if day == 0:
            # boot: background apps come up one millisecond apart
            events += [Event(t0 + k, EventKind.LAUNCH, a) for k, a in enumerate(bg)]
        else:
            events.append(Event(t0, EventKind.RELAUNCH_KILLED))
        order = list(fg)
        rng.shuffle(order)
        burst: list[Event] = []
        for k, a in enumerate(order):
            start = t0 + burst0 * MINUTE + k * slot
            burst.append(Event(start, EventKind.LAUNCH, a))
            rate = cfg.apps[a].access_rate
            if rate <= 0:
                continue
            n = max(1, round(rate * wl.interact_period_s))
            t = start + period
            while t < start + slot:
                burst.append(Event(t, EventKind.INTERACT, a, n, rng.next_u64()))
                t += period
        ticks = []
        if grows:
            for m in range(wl.idle_tick_minutes, 24 * 60, wl.idle_tick_minutes):
                if not burst0 <= m < burst1:
                    ticks.append(Event(t0 + m * MINUTE, EventKind.GROWTH, -1, wl.idle_tick_minutes))
        events += sorted(burst + ticks, key=lambda e: e.time)
    return events


def trace_lines(trace: Iterable[Event]) -> list[str]:
    return [json.dumps(e.record(), sort_keys=True) for e in trace]


def export_trace(trace: Iterable[Event], path) -> str:
    """Write ``trace`` as JSON Lines; returns its sha256 hex digest."""
    data = "".join(line + "\n" for line in trace_lines(trace))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(data)
    return hashlib.sha256(data.encode()).hexdigest()


def import_trace(path) -> list[Event]:
    with open(path, encoding="utf-8") as f:
        return [Event.from_record(json.loads(line)) for line in f if line.strip()]


def trace_hash(trace: Iterable[Event]) -> str:
    data = "".join(line + "\n" for line in trace_lines(trace))
    return hashlib.sha256(data.encode()).hexdigest()


# ------------------------------------------------------- reference roster
# (category, role, count, footprint MiB, symbols, mean symbol ms, xml ms, band, time-critical)
_FOREGROUND = [
    ("media", 3, 300, 900, 0.30, 260, True),
    ("messaging", 6, 180, 500, 0.30, 180, False),
    ("news", 2, 150, 400, 0.30, 220, False),
    ("game", 2, 400, 3000, 0.35, 300, True),
    ("internet", 2, 250, 700, 0.30, 240, False),
]
_BACKGROUND = [
    ("media", 4, True), ("messaging", 4, False), ("notes", 4, False), ("trip", 3, False),
    ("office", 4, False), ("game", 3, True), ("news", 3, False),
]
SO_SHARE = 0.36          # SO pages as a fraction of an app's initial footprint
BACKGROUND_SHARE = 0.31  # background footprint at boot as a fraction of RAM


def reference_scenario(seed: int = 42, device: DeviceConfig | None = None, days: int = 28,
                       policy: Policy = Policy.SWAM) -> ScenarioConfig:
    """40-app roster: 15 foreground apps in five categories and 25 background apps."""
    device = device or DeviceConfig()
    rng = SplitMix64(seed ^ 0x5EED)
    apps: list[AppSpec] = []

    def pages(mb: float) -> int:
        return max(2, int(mb * MiB) // PAGE_SIZE)

    for cat, count, mb, nsym, sym_ms, xml_ms, crit in _FOREGROUND:
        for k in range(count):
            size = pages(mb * rng.uniform(0.8, 1.2))
            so = round(size * SO_SHARE)
            nsym_k = max(1, round(nsym * rng.uniform(0.7, 1.3)))
            apps.append(AppSpec(
                name=f"{cat}-{k + 1}", role=Role.FOREGROUND, category=cat,
                so_pages=so, anon_pages=size - so, working_set_mb=0.0,
                so_profile=make_so_profile(rng, nsym_k, sym_ms, load_ms=round(rng.uniform(5, 20), 3)),
                xml_profile=make_xml_profile(xml_ms * rng.uniform(0.8, 1.2)),
                access_rate=rng.uniform(3.0, 8.0), background_growth_kb_per_min=0.0,
                oom_band=OomBand.CACHED, time_critical=crit))
    # messaging apps with the fewest libraries
    apps[3].so_profile = make_so_profile(rng, 40, 0.30, load_ms=4.0)

    bg_total = round(BACKGROUND_SHARE * device.ram / PAGE_SIZE)
    n_bg = sum(c for _, c, _ in _BACKGROUND)
    weights = [rng.uniform(0.6, 1.4) for _ in range(n_bg)]
    sizes = [int(bg_total * w / sum(weights)) for w in weights]
    sizes[-1] += bg_total - sum(sizes)
    bands = [OomBand.SERVICE, OomBand.CACHED]
    j = 0
    for cat, count, crit in _BACKGROUND:
        for k in range(count):
            size = sizes[j]
            so = round(size * SO_SHARE)
            apps.append(AppSpec(
                name=f"bg-{cat}-{k + 1}", role=Role.BACKGROUND, category=cat,
                so_pages=so, anon_pages=size - so,
                working_set_mb=size * PAGE_SIZE / MiB * rng.uniform(2.5, 4.0),
                so_profile=make_so_profile(rng, max(1, round(rng.uniform(80, 400))), 0.30,
                                           load_ms=round(rng.uniform(3, 10), 3)),
                xml_profile=make_xml_profile(rng.uniform(40, 120)),
                access_rate=0.0, background_growth_kb_per_min=50.0,
                oom_band=bands[j % 2], time_critical=crit))
            j += 1
    # three messaging apps map a common pool of platform SO pages
    for i, a in enumerate(apps):
        if a.category == "messaging" and a.role is Role.FOREGROUND and i in (3, 4, 5):
            a.so_sharing_group = 1
            a.shared_so_pages = pages(24)
    return ScenarioConfig(device=device, apps=apps, days=days, seed=seed, policy=policy)


def background_footprint(cfg: ScenarioConfig) -> int:
    """Bytes the background roster maps right after boot."""
    return sum(cfg.apps[i].initial_pages for i in cfg.background()) * PAGE_SIZE


def growth_pages(spec: AppSpec, minutes: int) -> int:
    return int(math.floor(spec.background_growth_kb_per_min * minutes * 1024 / PAGE_SIZE))
