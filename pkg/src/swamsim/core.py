"""Pages, applications and physical-memory accounting.

Page state is held column-wise in numpy arrays so a device with a million
4 KiB frames can be simulated for weeks at desk speed.  Page ids are
handed out in increasing order and never reused; compaction drops freed
rows but keeps the id column sorted, so ``searchsorted`` maps ids back to
rows.  Every app owns a list of contiguous id ranges (one per allocation)
plus the ids of shared SO pages it attached to.

All other modules mutate state through the ``_alloc``/``_relocate``/
``_free`` primitives here so the per-location counters stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .costs import SoProfile, XmlProfile

PAGE_SIZE = 4096
KiB = 1024
MiB = 1024 * KiB
GiB = 1024 * MiB


class PageKind(IntEnum):
    SO = 0
    ANON = 1
    FILE = 2


class Location(IntEnum):
    RESIDENT = 0
    ZRAM = 1
    SWAM_FILE = 2
    NAND = 3
    NOT_PRESENT = 4  # dropped by a cleaner; reloads from the .so on next access


_FREED = 5
_NLOC = 6


class Role(str, Enum):
    FOREGROUND = "foreground"
    BACKGROUND = "background"


class OomBand(IntEnum):
    """Kill priority, least killable first."""

    NATIVE = 0
    PERSISTENT = 1
    FOREGROUND = 2
    VISIBLE = 3
    SERVICE = 4
    CACHED = 5


class AppState(str, Enum):
    RUNNING = "running"
    KILLED = "killed"


class SimError(Exception):
    """Base class for simulator errors."""


class PreconditionError(SimError, ValueError):
    pass


class OutOfMemory(SimError):
    pass


class WrongKind(SimError):
    pass


class NotOwner(SimError):
    pass


class UnknownPage(SimError, KeyError):
    pass


class InvariantViolation(SimError, AssertionError):
    pass


@dataclass
class App:
    id: int
    name: str = ""
    role: Role = Role.BACKGROUND
    oom_band: OomBand = OomBand.CACHED
    time_critical: bool = False
    so_profile: SoProfile | None = None
    xml_profile: XmlProfile | None = None
    state: AppState = AppState.RUNNING
    kills: int = 0
    relaunches: int = 0
    # OOMK exclusion flags
    batch: bool = False
    root: bool = False
    hardware: bool = False
    init: bool = False

    @property
    def running(self) -> bool:
        return self.state is AppState.RUNNING


@dataclass
class SwamFile:
    id: int
    kind: PageKind  # SO and ANON pages never share a file
    created_at: int
    last_swap_in: int
    n_pages: int = 0

    @property
    def size(self) -> int:
        return self.n_pages * PAGE_SIZE


@dataclass(frozen=True)
class Page:
    id: int
    kind: PageKind
    owners: frozenset[int]
    ref_count: int
    last_access: int
    access_count: int
    location: Location
    file_id: int | None
    swapped_in_after_out: bool
    size: int = PAGE_SIZE


@dataclass(frozen=True)
class AccessResult:
    hit: bool
    latency_ms: float = 0.0

    @property
    def fault(self) -> bool:
        return not self.hit


_COLUMNS = {
    "_id": np.int64,
    "_kind": np.int8,
    "_owner": np.int32,
    "_ref": np.int32,
    "_last": np.int64,
    "_acc": np.int64,
    "_loc": np.int8,
    "_file": np.int64,
    "_siao": np.bool_,
    "_was_out": np.bool_,
}


class MemoryState:
    """Physical memory, ZRAM, the NAND partition and swam files of one device."""

    def __init__(self, ram_capacity: int, zram_capacity: int = 0, storage_capacity: int = 0,
                 storage_used_other: int = 0, compression_ratio: float = 2.5,
                 nand_capacity: int = 0, swap_cfg=None) -> None:
        if ram_capacity <= 0:
            raise PreconditionError("ram_capacity must be positive")
        if not compression_ratio > 1:
            raise PreconditionError("compression_ratio must be > 1")
        if zram_capacity < 0 or zram_capacity > ram_capacity:
            raise PreconditionError("zram_capacity must lie in [0, ram_capacity]")
        if storage_used_other < 0 or nand_capacity < 0:
            raise PreconditionError("storage sizes must be >= 0")
        if storage_used_other + nand_capacity > storage_capacity:
            raise PreconditionError("storage_used_other + nand_capacity exceeds storage_capacity")
        if swap_cfg is None:
            from .swap import SwapPolicyConfig
            swap_cfg = SwapPolicyConfig()
        self.ram_capacity = int(ram_capacity)
        self.zram_capacity = int(zram_capacity)
        self.storage_capacity = int(storage_capacity)
        self.storage_used_other = int(storage_used_other)
        self.nand_capacity = int(nand_capacity)
        self.compression_ratio = float(compression_ratio)
        self.swap_cfg = swap_cfg

        self.apps: dict[int, App] = {}
        self.swam_files: dict[int, SwamFile] = {}
        self._next_file = 0
        self._next_id = 0
        self._n = 0
        self._cap = 0
        for name, dt in _COLUMNS.items():
            setattr(self, name, np.empty(0, dtype=dt))
        self._grow(1024)
        self.counts = np.zeros(_NLOC, dtype=np.int64)
        self._owners: dict[int, set[int]] = {}  # only pages with ref_count > 1
        self._ranges: dict[int, list[tuple[int, int]]] = {}
        self._shared_in: dict[int, list[int]] = {}

    # ------------------------------------------------------------------ apps
    def add_app(self, app: App) -> App:
        if app.id in self.apps:
            raise PreconditionError(f"duplicate app id {app.id}")
        self.apps[app.id] = app
        self._ranges.setdefault(app.id, [])
        self._shared_in.setdefault(app.id, [])
        return app

    def app(self, app_id: int) -> App:
        try:
            return self.apps[app_id]
        except KeyError:
            raise PreconditionError(f"unknown app {app_id}") from None

    # -------------------------------------------------------------- counters
    @property
    def resident_bytes(self) -> int:
        return int(self.counts[Location.RESIDENT]) * PAGE_SIZE

    @property
    def zram_stored_logical(self) -> int:
        return int(self.counts[Location.ZRAM]) * PAGE_SIZE

    @property
    def zram_stored_physical(self) -> int:
        return self.compressed_size(self.zram_stored_logical)

    def compressed_size(self, logical: int) -> int:
        # compressed bytes occupy whole bytes: round up
        return int(math.ceil(logical / self.compression_ratio - 1e-9))

    def zram_room(self, n_pages: int = 1) -> bool:
        """Whether ``n_pages`` more pages fit in ZRAM."""
        extra = self.compressed_size(self.zram_stored_logical + n_pages * PAGE_SIZE)
        return extra <= self.zram_capacity

    def zram_fit(self) -> int:
        """Largest number of extra pages ZRAM can take."""
        logical_max = int(math.floor((self.zram_capacity + 1e-9) * self.compression_ratio))
        k = max(logical_max // PAGE_SIZE - int(self.counts[Location.ZRAM]), 0)
        while k > 0 and not self.zram_room(k):
            k -= 1
        return k

    @property
    def nand_used(self) -> int:
        return int(self.counts[Location.NAND]) * PAGE_SIZE

    @property
    def swam_bytes(self) -> int:
        return int(self.counts[Location.SWAM_FILE]) * PAGE_SIZE

    @property
    def storage_free(self) -> int:
        return self.storage_capacity - self.storage_used_other - self.nand_capacity - self.swam_bytes

    @property
    def used_bytes(self) -> int:
        return self.resident_bytes + self.zram_stored_physical

    @property
    def free_bytes(self) -> int:
        return self.ram_capacity - self.used_bytes

    @property
    def live_pages(self) -> int:
        return self._n - int(self.counts[_FREED])

    # ---------------------------------------------------------- page lookup
    def _grow(self, need: int) -> None:
        if need <= self._cap:
            return
        cap = max(need, 2 * self._cap, 1024)
        for name in _COLUMNS:
            old = getattr(self, name)
            new = np.empty(cap, dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)
        self._cap = cap

    def _idx(self, pids) -> np.ndarray:
        """Row indices of live page ids; raises UnknownPage otherwise."""
        pids = np.atleast_1d(np.asarray(pids, dtype=np.int64))
        ids = self._id[: self._n]
        pos = np.searchsorted(ids, pids)
        ok = pos < self._n
        ok[ok] = ids[pos[ok]] == pids[ok]
        ok[ok] = self._loc[pos[ok]] != _FREED
        if not ok.all():
            raise UnknownPage(f"unknown page id(s) {pids[~ok][:5].tolist()}")
        return pos

    def _idx1(self, pid: int) -> int:
        return int(self._idx([pid])[0])

    def owners_of_index(self, i: int) -> set[int]:
        pid = int(self._id[i])
        if pid in self._owners:
            return set(self._owners[pid])
        return {int(self._owner[i])}

    def page(self, pid: int) -> Page:
        i = self._idx1(pid)
        loc = Location(int(self._loc[i]))
        return Page(
            id=int(pid),
            kind=PageKind(int(self._kind[i])),
            owners=frozenset(self.owners_of_index(i)),
            ref_count=int(self._ref[i]),
            last_access=int(self._last[i]),
            access_count=int(self._acc[i]),
            location=loc,
            file_id=int(self._file[i]) if loc is Location.SWAM_FILE else None,
            swapped_in_after_out=bool(self._siao[i]),
        )

    def own_indices(self, app_id: int) -> np.ndarray:
        ranges = self._ranges.get(app_id, [])
        if not ranges:
            return np.empty(0, dtype=np.int64)
        r = np.array(ranges, dtype=np.int64)
        starts = np.searchsorted(self._id[: self._n], r[:, 0])
        lens = r[:, 1]
        ends = np.cumsum(lens)
        # row of the k-th owned page: start of its range plus offset within it
        return np.repeat(starts - ends + lens, lens) + np.arange(int(ends[-1]), dtype=np.int64)

    def app_indices(self, app_id: int, kind: PageKind | None = None) -> np.ndarray:
        """Row indices of every page ``app_id`` owns, in id order."""
        idx = self.own_indices(app_id)
        shared = self._shared_in.get(app_id, [])
        if shared:
            idx = np.sort(np.concatenate([idx, self._idx(shared)]))
        if kind is not None:
            idx = idx[self._kind[idx] == kind]
        return idx

    def pages_of(self, app_id: int, kind: PageKind | None = None) -> np.ndarray:
        return self._id[self.app_indices(app_id, kind)].copy()

    def own_page_count(self, app_id: int) -> int:
        return sum(n for _, n in self._ranges.get(app_id, []))

    def owned_bytes(self, app_id: int) -> int:
        """Bytes of every page the app owns in RAM, ZRAM or swap (not dropped pages)."""
        idx = self.app_indices(app_id)
        return int(np.count_nonzero(self._loc[idx] != Location.NOT_PRESENT)) * PAGE_SIZE

    def owned_bytes_all(self) -> dict[int, int]:
        """``owned_bytes`` for every running app."""
        return {a.id: self.owned_bytes(a.id) for a in self.apps.values() if a.running}

    def live_indices(self, loc: Location | None = None, kind: PageKind | None = None) -> np.ndarray:
        locs = self._loc[: self._n]
        m = locs != _FREED if loc is None else locs == loc
        if kind is not None:
            m &= self._kind[: self._n] == kind
        return np.flatnonzero(m)

    # ------------------------------------------------------------ mutation
    def _alloc(self, app_id: int, n: int, kind: PageKind, now: int) -> np.ndarray:
        start = self._next_id
        i0 = self._n
        self._grow(i0 + n)
        sl = slice(i0, i0 + n)
        self._id[sl] = np.arange(start, start + n, dtype=np.int64)
        self._kind[sl] = kind
        self._owner[sl] = app_id
        self._ref[sl] = 1
        self._last[sl] = now
        self._acc[sl] = 0
        self._loc[sl] = Location.RESIDENT
        self._file[sl] = -1
        self._siao[sl] = False
        self._was_out[sl] = False
        self._n += n
        self._next_id += n
        self.counts[Location.RESIDENT] += n
        self._ranges[app_id].append((start, n))
        return np.arange(i0, i0 + n, dtype=np.int64)

    def new_swam_file(self, kind: PageKind, now: int) -> SwamFile:
        f = SwamFile(id=self._next_file, kind=PageKind(kind), created_at=now, last_swap_in=now)
        self._next_file += 1
        self.swam_files[f.id] = f
        return f

    def _relocate(self, idx: np.ndarray, loc: int, file_ids=None) -> list[int]:
        """Move rows ``idx`` to ``loc``; returns ids of swam files that became empty (now unlinked)."""
        if len(idx) == 0:
            return []
        old = self._loc[idx]
        self.counts -= np.bincount(old, minlength=_NLOC)
        self.counts[loc] += len(idx)
        unlinked = []
        leaving = old == Location.SWAM_FILE
        if leaving.any():
            fids, c = np.unique(self._file[idx[leaving]], return_counts=True)
            for f, k in zip(fids.tolist(), c.tolist()):
                sf = self.swam_files[f]
                sf.n_pages -= k
                if sf.n_pages == 0:
                    del self.swam_files[f]
                    unlinked.append(f)
        self._loc[idx] = loc
        if loc == Location.SWAM_FILE:
            self._file[idx] = file_ids
            fids, c = np.unique(np.broadcast_to(np.asarray(file_ids, dtype=np.int64), idx.shape),
                                return_counts=True)
            for f, k in zip(fids.tolist(), c.tolist()):
                self.swam_files[f].n_pages += k
        else:
            self._file[idx] = -1
        if loc == Location.RESIDENT:
            self._siao[idx] |= self._was_out[idx]
        elif loc != _FREED:
            self._was_out[idx] = True
        return unlinked

    def _free(self, idx: np.ndarray) -> list[int]:
        self._ref[idx] = 0
        return self._relocate(idx, _FREED)

    def _touch(self, idx: np.ndarray, now: int, counts=1) -> None:
        self._last[idx] = now
        self._acc[idx] += counts

    def maybe_compact(self, min_dead: int = 1 << 16) -> bool:
        """Drop freed rows once they make up a quarter of the table.  Invalidates row indices."""
        dead = int(self.counts[_FREED])
        if dead < min_dead or dead * 4 < self._n:
            return False
        keep = self._loc[: self._n] != _FREED
        n = int(keep.sum())
        for name in _COLUMNS:
            col = getattr(self, name)
            col[:n] = col[: self._n][keep]
        self._n = n
        self.counts[_FREED] = 0
        return True

    # ------------------------------------------------------------ checking
    def check_invariants(self) -> list[str]:
        """Every accounting invariant, as a list of human-readable violations."""
        errs: list[str] = []
        n = self._n
        loc = self._loc[:n]
        ref = self._ref[:n]
        owner = self._owner[:n]
        c = [int(np.count_nonzero(loc == k)) for k in range(_FREED)]
        c.append(n - sum(c))
        if c != self.counts.tolist():
            errs.append(f"location counters {self.counts.tolist()} != recount {c}")
        if self.used_bytes > self.ram_capacity:
            errs.append(f"resident+zram {self.used_bytes} exceeds RAM {self.ram_capacity}")
        if self.zram_stored_physical > self.zram_capacity:
            errs.append("zram physical exceeds zram capacity")
        if self.nand_used > self.nand_capacity:
            errs.append("NAND partition overfull")
        if self.storage_free < 0:
            errs.append("storage overcommitted")
        # a row is live exactly when something still references it
        if ((ref == 0) != (loc == _FREED)).any():
            errs.append("live page with ref_count < 1 (or freed page still referenced)")
        fcol = self._file[:n]
        if int(np.count_nonzero(fcol != -1)) != c[Location.SWAM_FILE]:
            errs.append("file id set on a page outside a swam file (or missing inside one)")
        if c[Location.SWAM_FILE] == 0:
            if self.swam_files:
                errs.append("swam files exist but no page is in one")
        else:
            rows = np.flatnonzero(loc == Location.SWAM_FILE)
            fids = fcol.take(rows)
            nf = self._next_file
            if fids.min() < 0 or fids.max() >= nf:
                errs.append("page refers to an unknown swam file")
            else:
                # pages per (file, kind): one nonzero column per file, matching its kind
                nk = len(PageKind)
                per = np.bincount(fids * nk + self._kind[:n].take(rows), minlength=nf * nk).reshape(nf, nk)
                expect = np.zeros((nf, nk), dtype=np.int64)
                for f, sf in self.swam_files.items():
                    expect[f, sf.kind] = sf.n_pages
                if not np.array_equal(per, expect):
                    errs.append("swam file page counts or kinds disagree with page table")
                if any(sf.n_pages == 0 for sf in self.swam_files.values()):
                    errs.append("empty swam file not unlinked")

        # membership: paint each row with the running app whose own range
        # holds it (-1 for none), then add the shared-in attachments
        ids = self._id[:n]
        starts, lens, apps = [], [], []
        sr_rows, sr_apps = [], []
        for a in self.apps.values():
            ranges = self._ranges.get(a.id, [])
            shared = self._shared_in.get(a.id, [])
            if not a.running:
                if ranges or shared:
                    errs.append(f"killed app {a.id} still owns pages")
                continue
            for r0, k in ranges:
                starts.append(r0)
                lens.append(k)
                apps.append(a.id)
            if shared:
                try:
                    sr_rows.append(self._idx(shared))
                    sr_apps.append(np.full(len(shared), a.id, dtype=np.int32))
                except UnknownPage:
                    errs.append(f"app {a.id}: shared page freed")
        paint = np.full(n, -1, dtype=np.int32)
        if starts:
            order = np.argsort(starts, kind="stable")
            r0 = np.asarray(starts, dtype=np.int64)[order]
            k = np.asarray(lens, dtype=np.int64)[order]
            st = np.searchsorted(ids, r0)
            en = np.searchsorted(ids, r0 + k - 1) + 1
            if (en - st != k).any():
                errs.append("an owned range has lost rows")
            elif (st[1:] < en[:-1]).any():
                errs.append("owned ranges overlap")
            else:
                seg = np.empty(2 * len(st) + 1, dtype=np.int64)
                seg[0:-1:2] = st - np.concatenate(([0], en[:-1]))   # gaps
                seg[1::2] = k
                seg[-1] = n - en[-1]
                vals = np.full(len(seg), -1, dtype=np.int32)
                vals[1::2] = np.asarray(apps, dtype=np.int32)[order]
                paint = np.repeat(vals, seg)
        covered = paint >= 0
        if (covered & (paint != owner)).any():
            errs.append("page in an app's own range has a different primary owner")
        member = covered.astype(np.int32)
        if sr_rows:
            sr = np.concatenate(sr_rows)
            sa = np.concatenate(sr_apps)
            np.add.at(member, sr, 1)
            single = ref[sr] == 1
            if (owner[sr[single]] != sa[single]).any():
                errs.append("unshared page's primary owner is not its holder")
        # conservation: each reference is one owner, each live row one location
        if not np.array_equal(member, ref):
            errs.append("ref_count disagrees with owner membership (lost, freed or duplicated page)")
        if self._owners:
            keys = np.fromiter(self._owners.keys(), np.int64, len(self._owners))
            try:
                ki = self._idx(keys)
            except UnknownPage:
                errs.append("owner table lists a freed page")
                ki = None
            if ki is not None:
                sizes = np.fromiter((len(v) for v in self._owners.values()), np.int64, len(keys))
                if not np.array_equal(sizes, ref[ki]) or (sizes < 2).any():
                    errs.append("owner set size != ref_count")
                running = {a.id for a in self.apps.values() if a.running}
                prim = owner[ki].tolist()
                for p, o in zip(prim, self._owners.values()):
                    if p not in o or not o <= running:
                        errs.append("shared page lists a missing or killed owner")
                        break
        if int(np.count_nonzero(ref > 1)) != len(self._owners):
            errs.append("shared-page owner table out of sync")
        return errs

    def assert_invariants(self) -> None:
        errs = self.check_invariants()
        if errs:
            raise InvariantViolation("; ".join(errs))


# ---------------------------------------------------------------- operations
def allocate(state: MemoryState, app: int, n_pages: int, kind: PageKind = PageKind.ANON,
             now: int = 0) -> list[int]:
    """Allocate ``n_pages`` fresh resident pages for ``app``.

    Never reclaims: the caller must make room first.
    """
    a = state.app(app)
    if not a.running:
        raise PreconditionError(f"app {app} is not running")
    if n_pages < 1:
        raise PreconditionError("n_pages must be >= 1")
    if state.used_bytes + n_pages * PAGE_SIZE > state.ram_capacity:
        raise OutOfMemory(f"cannot allocate {n_pages} pages: {state.free_bytes} bytes free")
    idx = state._alloc(app, n_pages, PageKind(kind), now)
    return state._id[idx].tolist()


def share_so_page(state: MemoryState, page: int, app: int) -> None:
    """Attach a running ``app`` to an existing SO page."""
    i = state._idx1(page)
    if state._kind[i] != PageKind.SO:
        raise WrongKind(f"page {page} is not an SO page")
    a = state.app(app)
    if not a.running:
        raise PreconditionError(f"app {app} is not running")
    owners = state.owners_of_index(i)
    if app in owners:
        raise PreconditionError(f"app {app} already owns page {page}")
    owners.add(app)
    state._owners[int(page)] = owners
    state._ref[i] += 1
    state._shared_in[app].append(int(page))


def share_so_pages(state: MemoryState, pages, app: int) -> None:
    """Vectorised ``share_so_page`` for a whole pool of SO pages."""
    pages = [int(p) for p in pages]
    if not pages:
        return
    idx = state._idx(pages)
    if (state._kind[idx] != PageKind.SO).any():
        raise WrongKind("not every page is an SO page")
    a = state.app(app)
    if not a.running:
        raise PreconditionError(f"app {app} is not running")
    new_owners = []
    for pid, i in zip(pages, idx.tolist()):
        owners = state._owners.get(pid)
        if owners is None:
            owners = {int(state._owner[i])}
        if app in owners:
            raise PreconditionError(f"app {app} already owns page {pid}")
        new_owners.append((pid, owners))
    for pid, owners in new_owners:
        owners.add(app)
        state._owners[pid] = owners
    state._ref[idx] += 1
    state._shared_in[app].extend(pages)


def access(state: MemoryState, app: int, page: int, now: int) -> AccessResult:
    """One access by ``app``.  A non-resident page is swapped back in."""
    i = state._idx1(page)
    if app not in state.owners_of_index(i):
        raise NotOwner(f"app {app} does not own page {page}")
    state._touch(np.array([i]), now)
    if state._loc[i] == Location.RESIDENT:
        return AccessResult(hit=True, latency_ms=0.0)
    from .swap import swap_in
    return AccessResult(hit=False, latency_ms=swap_in(state, page, now, app=app))


def utilization(state: MemoryState) -> float:
    return state.used_bytes / state.ram_capacity
