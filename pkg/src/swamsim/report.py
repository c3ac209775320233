"""Daily report rows, CSV/JSON writers and cross-policy comparison."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .core import MiB
from .engine import MetricsLog
from .workload import DAY, ScenarioConfig


@dataclass(frozen=True)
class ReportRow:
    policy: str
    day: int              # 1-based
    kills_cumulative: int
    mean_free_mb: float
    mean_launch_ms: float
    mean_response_ms: float
    zram_used_mb: float   # physical, end of day
    swam_used_mb: float   # flash swap in use at end of day (swam files or NAND partition)


COLUMNS = [f.name for f in fields(ReportRow)]


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.3f}"
    return str(v)


def _mean_by_day(samples, days: int) -> list[float]:
    acc = [[] for _ in range(days)]
    for t, _, ms, *_ in samples:
        d = int(t // DAY)
        if d < days:
            acc[d].append(ms)
    return [float(np.mean(a)) if a else 0.0 for a in acc]


def daily_rows(m: MetricsLog) -> list[ReportRow]:
    free = m.daily_free()
    launch = _mean_by_day(m.launches, m.days)
    resp = _mean_by_day(m.responses, m.days)
    kill_days = np.array([k.time // DAY for k in m.kills], dtype=np.int64)
    rows = []
    for d in range(m.days):
        z, s = m.day_end[d] if d < len(m.day_end) else (0, 0)
        rows.append(ReportRow(
            policy=m.policy.value, day=d + 1,
            kills_cumulative=int(np.count_nonzero(kill_days <= d)),
            mean_free_mb=float(free[d]) / MiB, mean_launch_ms=launch[d], mean_response_ms=resp[d],
            zram_used_mb=z / MiB, swam_used_mb=s / MiB))
    return rows


def write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_metrics_csv(path, rows: list[ReportRow]) -> None:
    write_csv(path, COLUMNS, [list(astuple(r)) for r in rows])


def write_events(path, m: MetricsLog) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in m.records:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def summary(m: MetricsLog, cfg: ScenarioConfig, trace_hash: str) -> dict:
    per_app = Counter(cfg.apps[k.app].name for k in m.kills)
    by_killer = Counter(k.killer.value for k in m.kills)
    collapse = m.collapse_day(cfg.thresholds)
    return {
        "policy": m.policy.value,
        "days": m.days,
        "seed": cfg.seed,
        "trace_hash": trace_hash,
        "total_kills": len(m.kills),
        "kills_by_killer": dict(sorted(by_killer.items())),
        "kills_per_app": {a.name: per_app.get(a.name, 0) for a in cfg.apps},
        "first_kill_ms": None if not m.kills else m.kills[0].time,
        "collapse_day": None if collapse is None else collapse + 1,
        "mean_free_mb": round(float(np.mean(m.daily_free())) / MiB, 3),
        "mean_launch_ms": round(m.mean_launch_ms(), 3),
        "mean_response_ms": round(m.mean_response_ms(), 3),
        "launches": len(m.launches),
        "cold_launches": sum(1 for x in m.launches if x[3]),
        "page_hits": m.hits,
        "page_faults": m.faults,
        "invariant_violations": len(m.violations),
        "panic": m.panic,
        "panic_time_ms": m.panic_time,
    }


def write_summary(path, s: dict) -> None:
    Path(path).write_text(json.dumps(s, indent=2, sort_keys=True) + "\n", encoding="utf-8")


COMPARE_COLUMNS = ["policy", "total_kills", "first_kill_day", "collapse_day", "mean_free_mb",
                   "mean_launch_ms", "mean_response_ms", "kills_ratio", "launch_ratio",
                   "response_ratio", "trace_hash"]


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


def compare_rows(runs: list[tuple[MetricsLog, dict]]) -> list[list]:
    """One row per policy; ratios are relative to the first policy listed."""
    ref = runs[0][1]
    rows = []
    for m, s in runs:
        first = m.first_kill_time / DAY if m.kills else math.inf
        rows.append([
            s["policy"], s["total_kills"], first,
            "" if s["collapse_day"] is None else s["collapse_day"],
            s["mean_free_mb"], s["mean_launch_ms"], s["mean_response_ms"],
            _ratio(s["total_kills"], ref["total_kills"]),
            _ratio(s["mean_launch_ms"], ref["mean_launch_ms"]),
            _ratio(s["mean_response_ms"], ref["mean_response_ms"]),
            s["trace_hash"],
        ])
    return rows
