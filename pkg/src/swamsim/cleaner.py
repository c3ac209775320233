"""OOM Cleaner: reclaim swap space held by SO pages without killing anyone.

SO Eraser drops SO pages sitting in ZRAM.  They are file-backed, so no
I/O is needed; the price is paid later, when an owner touches the page
again and the linker has to rebuild its PLT/GOT entries.  Pages go in
ascending (access count, sharing count, id) order.

ISOP Eraser periodically deletes whole swam files of SO pages that have
not seen a swap-in for ``isop_cold_threshold``, oldest first.  When free
storage drops below ``storage_low_watermark`` it also deletes the coldest
remaining SO files until the watermark is met and switches to the shorter
``isop_fast_interval``.  Files of normal pages are never deleted: their
content exists nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PAGE_SIZE, Location, MemoryState, PageKind, PreconditionError, SimError

MINUTE = 60_000


class NothingToClean(SimError):
    pass


@dataclass
class CleanerConfig:
    isop_interval: int = 10 * MINUTE
    isop_cold_threshold: int = 30 * MINUTE
    storage_low_watermark: float = 0.10
    isop_fast_interval: int = 1 * MINUTE

    def __post_init__(self) -> None:
        if not self.isop_fast_interval < self.isop_interval:
            raise PreconditionError("isop_fast_interval must be shorter than isop_interval")
        if not 0 < self.storage_low_watermark < 1:
            raise PreconditionError("storage_low_watermark must lie in (0, 1)")
        if self.isop_fast_interval <= 0 or self.isop_cold_threshold < 0:
            raise PreconditionError("cleaner intervals must be positive")


@dataclass
class CleanRecord:
    time: int
    eraser: str  # "so" or "isop"
    ids: list[int]
    bytes: int
    pages: int = 0

    def record(self) -> dict:
        return {"t": self.time, "type": "clean", "eraser": self.eraser, "ids": self.ids,
                "bytes": self.bytes, "pages": self.pages}


def so_erase_order(state: MemoryState) -> np.ndarray:
    """Row indices of SO pages in ZRAM, in reclaim order."""
    idx = state.live_indices(Location.ZRAM, PageKind.SO)
    return idx[np.lexsort((state._id[idx], state._ref[idx], state._acc[idx]))]


def so_erase(state: MemoryState, bytes_needed: int, now: int) -> list[int]:
    """Drop ZRAM-resident SO pages until ``bytes_needed`` of RAM is freed.

    Returns the reclaimed page ids; they are left NOT_PRESENT.
    """
    if bytes_needed <= 0:
        return []
    order = so_erase_order(state)
    if len(order) == 0:
        raise NothingToClean("no SO pages in ZRAM")
    logical0 = state.zram_stored_logical
    phys0 = state.compressed_size(logical0)
    k = np.arange(1, len(order) + 1, dtype=np.int64)
    phys = np.ceil((logical0 - k * PAGE_SIZE) / state.compression_ratio - 1e-9).astype(np.int64)
    hit = np.flatnonzero(phys0 - phys >= bytes_needed)
    take = order[: int(hit[0]) + 1 if len(hit) else len(order)]
    ids = state._id[take].tolist()
    state._relocate(take, Location.NOT_PRESENT)
    return ids


def storage_free_fraction(state: MemoryState) -> float:
    if state.storage_capacity <= 0:
        return 1.0
    return state.storage_free / state.storage_capacity


def _delete_file(state: MemoryState, fid: int) -> int:
    rows = np.flatnonzero((state._loc[: state._n] == Location.SWAM_FILE) & (state._file[: state._n] == fid))
    state._relocate(rows, Location.NOT_PRESENT)  # empties and unlinks the file
    return len(rows)


def isop_tick(state: MemoryState, now: int, cfg: CleanerConfig | None = None,
              log: list | None = None) -> list[int]:
    """One ISOP Eraser pass; returns the unlinked swam file ids in deletion order."""
    cfg = cfg or CleanerConfig()
    so_files = sorted((f for f in state.swam_files.values() if f.kind == PageKind.SO),
                      key=lambda f: (f.last_swap_in, f.id))
    deleted: list[int] = []
    pages = 0
    survivors = []
    for f in so_files:
        if now - f.last_swap_in > cfg.isop_cold_threshold:
            pages += _delete_file(state, f.id)
            deleted.append(f.id)
        else:
            survivors.append(f)
    for f in survivors:
        if storage_free_fraction(state) >= cfg.storage_low_watermark:
            break
        pages += _delete_file(state, f.id)
        deleted.append(f.id)
    if log is not None and deleted:
        log.append(CleanRecord(now, "isop", deleted, pages * PAGE_SIZE, pages))
    return deleted


def active_isop_interval(state: MemoryState, cfg: CleanerConfig) -> int:
    """Interval until the next ISOP pass given current storage pressure."""
    if storage_free_fraction(state) < cfg.storage_low_watermark:
        return cfg.isop_fast_interval
    return cfg.isop_interval
