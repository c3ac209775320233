"""Adaptive Swap: SO-first victim ranking, fast/slow routing, swam files.

Two swap paths exist.  The fast path compresses pages into ZRAM (in RAM,
fixed capacity); the slow path writes them to swam files on flash, which
are created on demand and unlinked as soon as they empty.  An SO page
mapped by a single app goes slow, a shared SO page goes fast; normal pages
go fast only for apps marked time-critical.

Victim SO pages are ranked in four strict tiers:

1. not accessed within ``recency_window``
2. ``ref_count`` below ``ref_count_threshold``
3. swapped out before and since swapped back in
4. everything else, owners holding the most resident SO memory first

Ties fall back to ascending page id.  Normal (ANON) pages are only
touched once no resident SO page is left, least recently used first.

The baseline policies (NAND swap, ZRAM, ZRAM + NAND) use plain LRU over
all swappable pages and a fixed-size partition on flash.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import (PAGE_SIZE, KiB, MiB, App, Location, MemoryState, OutOfMemory, Page, PageKind,
                   PreconditionError, SimError)
from .costs import so_rebuild_cost


class SwapPath(str, Enum):
    FAST_ZRAM = "fast_zram"
    SLOW_SWAM = "slow_swam"
    SLOW_NAND = "slow_nand"  # fixed partition, baselines only


class SwapSpaceFull(SimError):
    """Swap target exhausted; ``events`` holds the swap-outs done before it ran out."""

    def __init__(self, msg: str, events: list | None = None) -> None:
        super().__init__(msg)
        self.events = events or []


class ZramFull(SwapSpaceFull):
    pass


class StorageFull(SwapSpaceFull):
    pass


class AlreadyResident(SimError):
    pass


class BadGranularity(SimError, ValueError):
    pass


@dataclass
class SwapPolicyConfig:
    recency_window: int = 60_000            # ms
    ref_count_threshold: int = 2
    unmap_unit: int = 4 * MiB               # runtime-adjustable
    baseline_unmap_unit: int = 32 * KiB     # fixed granularity of the baselines
    swam_file_capacity: int = 4096          # pages (16 MiB)
    storage_read_bw: float = 2.1e6          # bytes/ms (2,100 MB/s)
    storage_write_bw: float = 1.2e6         # bytes/ms (1,200 MB/s)
    zram_in_cost: float = 0.001             # ms per page (decompress)
    zram_out_cost: float = 0.004            # ms per page (compress)
    per_check_cost: float = 0.002           # ms per higher-priority-task check
    per_page_unmap_cost: float = 0.001      # ms per unmapped page
    preempt_cost: float = 1.0               # ms a preempting task holds the CPU

    def __post_init__(self) -> None:
        for name in ("unmap_unit", "baseline_unmap_unit"):
            v = getattr(self, name)
            if v < PAGE_SIZE or v % PAGE_SIZE:
                raise BadGranularity(f"{name} must be a positive multiple of {PAGE_SIZE}")
        if self.swam_file_capacity < 1:
            raise PreconditionError("swam_file_capacity must be >= 1")
        if self.storage_read_bw <= 0 or self.storage_write_bw <= 0:
            raise PreconditionError("storage bandwidths must be positive")

    @property
    def slow_in_ms(self) -> float:
        return PAGE_SIZE / self.storage_read_bw

    @property
    def slow_out_ms(self) -> float:
        return PAGE_SIZE / self.storage_write_bw


@dataclass(frozen=True)
class VictimRank:
    page: int
    tier: int
    tiebreak_key: tuple[int, int]


@dataclass
class SwapEvent:
    time: int
    path: SwapPath
    pages: np.ndarray
    latency_ms: float
    zram_room: bool  # could ZRAM take another page when this batch was issued

    @property
    def n_pages(self) -> int:
        return len(self.pages)

    @property
    def bytes(self) -> int:
        return self.n_pages * PAGE_SIZE

    def record(self) -> dict:
        return {"t": self.time, "type": "swap_out", "path": self.path.value,
                "pages": self.n_pages, "bytes": self.bytes,
                "latency_ms": round(self.latency_ms, 6), "zram_room": self.zram_room}


# ------------------------------------------------------------------ ranking
def _resident_so_bytes(state: MemoryState) -> np.ndarray:
    """Resident SO bytes per app id (index = app id)."""
    size = max(state.apps, default=-1) + 1
    res_so = state.live_indices(Location.RESIDENT, PageKind.SO)
    out = np.bincount(state._owner[res_so], minlength=size).astype(np.int64)
    for pid, owners in state._owners.items():
        i = state._idx1(pid)
        if state._loc[i] == Location.RESIDENT and state._kind[i] == PageKind.SO:
            prim = int(state._owner[i])
            for a in owners:
                if a != prim:
                    out[a] += 1
    return out * PAGE_SIZE


def _largest_owner_bytes(state: MemoryState, idx: np.ndarray, per_app: np.ndarray) -> np.ndarray:
    key = per_app[state._owner[idx]]
    if state._owners:
        shared = np.flatnonzero(state._ref[idx] > 1)
        for j in shared.tolist():
            owners = state._owners[int(state._id[idx[j]])]
            key[j] = max(per_app[a] for a in owners)
    return key


def _so_tiers(state: MemoryState, idx: np.ndarray, now: int, cfg: SwapPolicyConfig) -> np.ndarray:
    tier = np.full(len(idx), 4, dtype=np.int8)
    tier[state._siao[idx]] = 3
    tier[state._ref[idx] < cfg.ref_count_threshold] = 2
    tier[(now - state._last[idx]) > cfg.recency_window] = 1
    return tier


def _exclude(idx: np.ndarray, exclude: np.ndarray | None) -> np.ndarray:
    if exclude is None or len(exclude) == 0:
        return idx
    return idx[~np.isin(idx, exclude, assume_unique=False)]


def so_victim_order(state: MemoryState, now: int, cfg: SwapPolicyConfig | None = None,
                    exclude: np.ndarray | None = None) -> np.ndarray:
    """Row indices of every resident SO page, best victim first."""
    cfg = cfg or state.swap_cfg
    cand = _exclude(state.live_indices(Location.RESIDENT, PageKind.SO), exclude)
    if len(cand) == 0:
        return cand
    tier = _so_tiers(state, cand, now, cfg)
    parts = [cand[tier == t] for t in (1, 2, 3)]  # rows are in id order already
    t4 = cand[tier == 4]
    if len(t4):
        key = _largest_owner_bytes(state, t4, _resident_so_bytes(state))
        parts.append(t4[np.lexsort((state._id[t4], -key))])
    return np.concatenate(parts)


def rank_so_victims(state: MemoryState, now: int, cfg: SwapPolicyConfig | None = None) -> list[VictimRank]:
    cfg = cfg or state.swap_cfg
    order = so_victim_order(state, now, cfg)
    if len(order) == 0:
        return []
    tier = _so_tiers(state, order, now, cfg)
    key = _largest_owner_bytes(state, order, _resident_so_bytes(state))
    ids = state._id[order]
    return [VictimRank(int(p), int(t), (int(k), int(p))) for p, t, k in zip(ids, tier, key)]


def route(page: Page, owner: App) -> SwapPath:
    """Swap path for a resident victim page."""
    if page.kind is PageKind.SO:
        return SwapPath.SLOW_SWAM if page.ref_count == 1 else SwapPath.FAST_ZRAM
    return SwapPath.FAST_ZRAM if owner.time_critical else SwapPath.SLOW_SWAM


def _fast_mask(state: MemoryState, idx: np.ndarray) -> np.ndarray:
    """Vectorised ``route``: True where the page takes the fast path."""
    so = state._kind[idx] == PageKind.SO
    crit_ids = [a.id for a in state.apps.values() if a.time_critical]
    crit = np.isin(state._owner[idx], crit_ids) if crit_ids else np.zeros(len(idx), bool)
    return np.where(so, state._ref[idx] > 1, crit)


# ----------------------------------------------------------------- movement
def _place_in_files(state: MemoryState, idx: np.ndarray, now: int, cfg: SwapPolicyConfig) -> np.ndarray:
    """File id per row: newest non-full file of the matching kind, new files as needed."""
    fids = np.empty(len(idx), dtype=np.int32)
    kinds = state._kind[idx]
    for kind in PageKind:
        pos = np.flatnonzero(kinds == kind)
        if len(pos) == 0:
            continue
        cur = None
        for f in reversed(state.swam_files.values()):
            if f.kind == kind and f.n_pages < cfg.swam_file_capacity:
                cur = f
                break
        k = 0
        while k < len(pos):
            if cur is None:
                cur = state.new_swam_file(kind, now)
            take = min(cfg.swam_file_capacity - cur.n_pages, len(pos) - k)
            fids[pos[k:k + take]] = cur.id
            k += take
            cur = None
    return fids


def _swap_out_rows(state: MemoryState, idx: np.ndarray, path: SwapPath, now: int,
                   cfg: SwapPolicyConfig | None = None) -> float:
    cfg = cfg or state.swap_cfg
    n = len(idx)
    if n == 0:
        return 0.0
    if (state._loc[idx] != Location.RESIDENT).any():
        raise PreconditionError("swap_out of a non-resident page")
    if path is SwapPath.FAST_ZRAM:
        if not state.zram_room(n):
            raise ZramFull(f"ZRAM cannot take {n} more pages")
        state._relocate(idx, Location.ZRAM)
        return n * cfg.zram_out_cost
    if path is SwapPath.SLOW_NAND:
        if state.nand_used + n * PAGE_SIZE > state.nand_capacity:
            raise StorageFull(f"NAND partition cannot take {n} more pages")
        state._relocate(idx, Location.NAND)
        return n * cfg.slow_out_ms
    if n * PAGE_SIZE > state.storage_free:
        raise StorageFull(f"storage cannot take {n} more pages")
    fids = _place_in_files(state, idx, now, cfg)
    state._relocate(idx, Location.SWAM_FILE, fids)
    return n * cfg.slow_out_ms


def swap_out(state: MemoryState, page: int, path: SwapPath, now: int) -> float:
    """Swap one resident page out along ``path``; returns latency in ms."""
    return _swap_out_rows(state, state._idx([page]), SwapPath(path), now)


def _swap_in_rows(state: MemoryState, idx: np.ndarray, now: int, app: int | None = None,
                  cfg: SwapPolicyConfig | None = None) -> float:
    cfg = cfg or state.swap_cfg
    if len(idx) == 0:
        return 0.0
    loc = state._loc[idx]
    if (loc == Location.RESIDENT).any():
        raise AlreadyResident("page is already resident")
    nz = int(np.count_nonzero(loc == Location.ZRAM))
    new_used = (state.resident_bytes + len(idx) * PAGE_SIZE
                + state.compressed_size(state.zram_stored_logical - nz * PAGE_SIZE))
    if new_used > state.ram_capacity:
        raise OutOfMemory(f"no room to swap in {len(idx)} pages")
    latency = nz * cfg.zram_in_cost
    latency += int(np.count_nonzero((loc == Location.SWAM_FILE) | (loc == Location.NAND))) * cfg.slow_in_ms
    np_rows = idx[loc == Location.NOT_PRESENT]
    if len(np_rows):
        latency += len(np_rows) * cfg.slow_in_ms
        owners = np.full(len(np_rows), app) if app is not None else state._owner[np_rows]
        for a, k in zip(*np.unique(owners, return_counts=True)):
            prof = state.apps[int(a)].so_profile
            n_so = len(state.app_indices(int(a), PageKind.SO))
            latency += so_rebuild_cost(prof, int(k), n_so)
    in_file = idx[loc == Location.SWAM_FILE]
    if len(in_file):
        for f in np.unique(state._file[in_file]).tolist():
            state.swam_files[f].last_swap_in = now
    state._relocate(idx, Location.RESIDENT)
    return latency


def swap_in(state: MemoryState, page: int, now: int, app: int | None = None) -> float:
    """Bring one page back to RAM; returns latency in ms.

    Emptied swam files are unlinked inside the same call.
    """
    return _swap_in_rows(state, state._idx([page]), now, app)


def unmap_cost(total_bytes: int, unit: int, hp_arrival: float | None = None, *,
               per_check_cost: float = 0.002, per_page_cost: float = 0.001,
               preempt_cost: float = 1.0) -> tuple[int, float]:
    """Higher-priority-task checks and completion time for unmapping ``total_bytes``.

    The region is unmapped ``unit`` bytes at a time with one check after
    each unit.  A task arriving at ``hp_arrival`` ms into the window runs
    at the next unit boundary and delays completion by ``preempt_cost``.
    """
    if unit < PAGE_SIZE or unit % PAGE_SIZE:
        raise BadGranularity(f"unmap unit {unit} is not a positive multiple of {PAGE_SIZE}")
    if total_bytes < 0 or total_bytes % PAGE_SIZE:
        raise BadGranularity(f"total_bytes {total_bytes} is not a multiple of {PAGE_SIZE}")
    checks = -(-total_bytes // unit)
    completion = checks * per_check_cost + (total_bytes // PAGE_SIZE) * per_page_cost
    if hp_arrival is not None and 0 <= hp_arrival < completion:
        completion += preempt_cost
    return checks, completion


def stage_unmap_ms(total_bytes: int, unit: int, cfg: SwapPolicyConfig) -> float:
    return unmap_cost(total_bytes, unit, per_check_cost=cfg.per_check_cost,
                      per_page_cost=cfg.per_page_unmap_cost, preempt_cost=cfg.preempt_cost)[1]


# ------------------------------------------------------------------- stages
def _prefix_for(state: MemoryState, order: np.ndarray, fast: np.ndarray, remaining: int) -> int:
    """Smallest prefix of ``order`` whose swap-out frees ``remaining`` bytes (or all of it)."""
    if remaining <= 0 or len(order) == 0:
        return 0
    k = np.arange(1, len(order) + 1, dtype=np.int64)
    logical0 = state.zram_stored_logical
    phys0 = state.compressed_size(logical0)
    cum_fast = np.cumsum(fast, dtype=np.int64)
    phys = np.ceil((logical0 + cum_fast * PAGE_SIZE) / state.compression_ratio - 1e-9).astype(np.int64)
    freed = k * PAGE_SIZE - (phys - phys0)
    hit = np.flatnonzero(freed >= remaining)
    return int(hit[0]) + 1 if len(hit) else len(order)


def _runs(state: MemoryState, rows: np.ndarray, paths: list[SwapPath], now: int, zram_room: bool,
          cfg: SwapPolicyConfig, fast: np.ndarray) -> list[SwapEvent]:
    """Apply swap-outs and return one event per run of equal path, in victim order."""
    events: list[SwapEvent] = []
    if len(rows) == 0:
        return events
    ids = state._id[rows].copy()
    for path, m in ((paths[0], fast), (paths[1], ~fast)):
        _swap_out_rows(state, rows[m], path, now, cfg)
    cuts = np.flatnonzero(np.diff(fast.astype(np.int8))) + 1
    bounds = [0, *cuts.tolist(), len(rows)]
    for a, b in zip(bounds[:-1], bounds[1:]):
        path = paths[0] if fast[a] else paths[1]
        per = cfg.zram_out_cost if path is SwapPath.FAST_ZRAM else cfg.slow_out_ms
        events.append(SwapEvent(now, path, ids[a:b], (b - a) * per, zram_room))
    return events


def _drain(state: MemoryState, order: np.ndarray, fast: np.ndarray, remaining: int, now: int,
           cfg: SwapPolicyConfig, spill: bool, slow_path: SwapPath) -> tuple[list[SwapEvent], int, Exception | None]:
    """Swap out a prefix of ``order``; stops early at a capacity limit."""
    k = _prefix_for(state, order, fast, remaining)
    rows, fast = order[:k], fast[:k].copy()
    err: Exception | None = None
    zfit = state.zram_fit()
    over = np.flatnonzero(np.cumsum(fast) > zfit)
    if len(over):
        if spill:
            fast[over[0]:] = False
        else:
            rows, fast = rows[:over[0]], fast[:over[0]]
            err = ZramFull("ZRAM full")
    if slow_path is SwapPath.SLOW_NAND:
        sfit = (state.nand_capacity - state.nand_used) // PAGE_SIZE
    else:
        sfit = state.storage_free // PAGE_SIZE
    over = np.flatnonzero(np.cumsum(~fast) > sfit)
    if len(over):
        rows, fast = rows[:over[0]], fast[:over[0]]
        err = StorageFull("storage full")
    used0 = state.used_bytes
    room = state.zram_room(1)
    events = _runs(state, rows, [SwapPath.FAST_ZRAM, slow_path], now, room, cfg, fast)
    return events, used0 - state.used_bytes, err


def _lru_rows(state: MemoryState, cand: np.ndarray, k: int) -> np.ndarray:
    """The ``k`` least recently used rows of ``cand`` (ties by id), in order."""
    if len(cand) == 0 or k <= 0:
        return cand[:0]
    key = state._last[cand] * (1 << 27) + cand
    if k < len(cand):
        part = np.argpartition(key, k - 1)[:k]
        cand, key = cand[part], key[part]
    return cand[np.argsort(key, kind="stable")]


def _pages_for(state: MemoryState, nbytes: int) -> int:
    """Upper bound on pages whose swap-out frees ``nbytes`` under any path mix."""
    per = PAGE_SIZE * (1 - 1 / state.compression_ratio)
    return int(math.ceil(nbytes / max(per - 1, 1))) + 2


def adaptive_swap_step(state: MemoryState, now: int, bytes_needed: int,
                       cfg: SwapPolicyConfig | None = None, exclude: np.ndarray | None = None,
                       spill: bool = False) -> list[SwapEvent]:
    """Swap out ranked SO pages, then LRU normal pages, until ``bytes_needed`` is freed.

    Raises ``ZramFull``/``StorageFull`` (carrying the events done so far)
    when a target fills.  With ``spill`` a fast-path victim that no longer
    fits ZRAM is written to a swam file instead.
    """
    cfg = cfg or state.swap_cfg
    if bytes_needed <= 0:
        return []
    events: list[SwapEvent] = []
    order = so_victim_order(state, now, cfg, exclude)
    ev, freed, err = _drain(state, order, _fast_mask(state, order), bytes_needed, now, cfg, spill,
                            SwapPath.SLOW_SWAM)
    events += ev
    if err is not None:
        err.events = events
        raise err
    remaining = bytes_needed - freed
    if remaining > 0:
        cand = _exclude(state.live_indices(Location.RESIDENT, PageKind.ANON), exclude)
        order = _lru_rows(state, cand, _pages_for(state, remaining))
        ev, freed, err = _drain(state, order, _fast_mask(state, order), remaining, now, cfg, spill,
                                SwapPath.SLOW_SWAM)
        events += ev
        if err is not None:
            err.events = events
            raise err
    return events


def baseline_swap_step(state: MemoryState, now: int, bytes_needed: int, use_zram: bool,
                       use_nand: bool, cfg: SwapPolicyConfig | None = None,
                       exclude: np.ndarray | None = None) -> list[SwapEvent]:
    """LRU swap-out for the baseline policies.

    With both targets enabled, the NAND partition is used only once ZRAM
    cannot take another page.  Returns what it managed when space runs out.
    """
    cfg = cfg or state.swap_cfg
    if bytes_needed <= 0 or not (use_zram or use_nand):
        return []
    room = (state.zram_fit() if use_zram else 0) + \
        ((state.nand_capacity - state.nand_used) // PAGE_SIZE if use_nand else 0)
    if room == 0:
        return []
    cand = state.live_indices(Location.RESIDENT)
    cand = _exclude(cand[state._kind[cand] != PageKind.FILE], exclude)
    order = _lru_rows(state, cand, min(_pages_for(state, bytes_needed), room))
    events: list[SwapEvent] = []
    remaining = bytes_needed
    if use_zram:
        zfit = state.zram_fit()
        head = order[:zfit]
        ev, freed, _ = _drain(state, head, np.ones(len(head), bool), remaining, now, cfg, False,
                              SwapPath.SLOW_NAND)
        events += ev
        remaining -= freed
        order = order[sum(e.n_pages for e in ev):]
    if use_nand and remaining > 0 and (not use_zram or not state.zram_room(1)):
        ev, freed, _ = _drain(state, order, np.zeros(len(order), bool), remaining, now, cfg, False,
                              SwapPath.SLOW_NAND)
        events += ev
    return events
