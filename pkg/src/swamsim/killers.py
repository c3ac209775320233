"""App killers: the baseline LMKD and OOMK, and the cost-aware EOOM Killer.

All three return a victim and leave the actual kill to :func:`kill`, which
frees every exclusive page of the app wherever it sits and detaches the
app from shared SO pages that other apps still map.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .core import AppState, MemoryState, OomBand, SimError, utilization
from .costs import CostConfig, relaunch_cost


class Killer(str, Enum):
    LMKD = "LMKD"
    OOMK = "OOMK"
    EOOM = "EOOM"


class SystemPanic(SimError):
    """No killable app is left while memory is still short."""


class AlreadyKilled(SimError):
    pass


@dataclass(frozen=True)
class KillEvent:
    time: int
    killer: Killer
    app: int
    bytes_reclaimed: int
    relaunch_cost_at_kill: float

    def record(self) -> dict:
        return {"t": self.time, "type": "kill", "killer": self.killer.value, "app": self.app,
                "bytes_reclaimed": self.bytes_reclaimed,
                "relaunch_cost_at_kill": round(self.relaunch_cost_at_kill, 6)}


def _running(state: MemoryState, exclude: Iterable[int]) -> list:
    skip = set(exclude)
    return [a for a in state.apps.values() if a.running and a.id not in skip]


def oomk_eligible(app) -> bool:
    return not (app.batch or app.root or app.hardware or app.init)


def lmkd_select(state: MemoryState, util: float | None = None, threshold: float = 0.80,
                exclude: Iterable[int] = ()) -> int | None:
    """Most killable band first, then largest footprint, then lowest id.

    NATIVE and PERSISTENT apps are never LMKD victims.
    """
    util = utilization(state) if util is None else util
    if util < threshold:
        return None
    cands = [a for a in _running(state, exclude) if a.oom_band > OomBand.PERSISTENT]
    if not cands:
        return None
    return min(cands, key=lambda a: (-a.oom_band, -state.owned_bytes(a.id), a.id)).id


def oomk_select(state: MemoryState, exclude: Iterable[int] = ()) -> int:
    """Heuristic kernel killer: drop protected apps, then band, then size."""
    cands = [a for a in _running(state, exclude) if oomk_eligible(a)]
    if not cands:
        raise SystemPanic("OOMK found no killable app")
    return min(cands, key=lambda a: (-a.oom_band, -state.owned_bytes(a.id), a.id)).id


def eoom_select(state: MemoryState, costs: Mapping[int, float] | None = None,
                exclude: Iterable[int] = (), cost_cfg: CostConfig | None = None) -> int:
    """Cheapest app to bring back among the OOMK-eligible ones."""
    cands = [a for a in _running(state, exclude) if oomk_eligible(a)]
    if not cands:
        raise SystemPanic("EOOM found no killable app")
    if costs is None:
        costs = {a.id: relaunch_cost(a, cost_cfg) for a in cands}
    return min(cands, key=lambda a: (costs[a.id], -state.owned_bytes(a.id), a.id)).id


def _detach(state: MemoryState, rows: np.ndarray, app_id: int) -> None:
    """Remove ``app_id`` from the owner sets of shared rows that survive it."""
    for i in rows.tolist():
        pid = int(state._id[i])
        owners = state._owners[pid]
        owners.discard(app_id)
        state._ref[i] -= 1
        if int(state._owner[i]) == app_id:
            state._owner[i] = min(owners)
        if len(owners) == 1:
            del state._owners[pid]


def kill(state: MemoryState, app: int, killer: Killer | str, now: int,
         cost_cfg: CostConfig | None = None) -> KillEvent:
    """Terminate ``app`` and reclaim all of its memory."""
    a = state.app(app)
    if not a.running:
        raise AlreadyKilled(f"app {app} is already killed")
    reclaimed = state.owned_bytes(app)
    cost = relaunch_cost(a, cost_cfg)

    # pages in the app's own ranges, then pages it attached to; a row
    # whose only remaining holder is this app is freed, others just lose it
    rows = [state.own_indices(app)]
    if state._shared_in[app]:
        rows.append(state._idx(state._shared_in[app]))
    rows = np.concatenate(rows)
    shared = state._ref[rows] > 1
    _detach(state, rows[shared], app)
    state._free(rows[~shared])
    state._shared_in[app] = []
    state._ranges[app] = []

    a.state = AppState.KILLED
    a.kills += 1
    return KillEvent(now, Killer(killer), app, reclaimed, cost)
