"""Scenario files: versioned JSON, validated field by field.

Every problem is reported as a :class:`ConfigInvalid` whose ``path``
names the offending field, e.g. ``apps[3].so_profile.symbols[7]``.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Any

from .cleaner import CleanerConfig
from .core import OomBand, PreconditionError, Role
from .costs import CostConfig, SoProfile, XmlProfile
from .swap import SwapPolicyConfig
from .workload import (AppSpec, DeviceConfig, Policy, ScenarioConfig, Thresholds, WorkloadConfig)

SCHEMA_VERSION = 1


class ConfigInvalid(ValueError):
    def __init__(self, path: str, msg: str) -> None:
        super().__init__(f"{path}: {msg}")
        self.path = path


def _num(obj: dict, key: str, path: str, *, integer: bool = False, minimum: float | None = None,
         default: Any = None, required: bool = False):
    if key not in obj:
        if required:
            raise ConfigInvalid(f"{path}.{key}".lstrip("."), "missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
        raise ConfigInvalid(f"{path}.{key}".lstrip("."), f"expected {'integer' if integer else 'number'}, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigInvalid(f"{path}.{key}".lstrip("."), f"must be >= {minimum}, got {v}")
    return v


def _section(cls, obj: Any, path: str):
    """Build a flat config dataclass from a dict, type-checking against the defaults."""
    if obj is None:
        return cls()
    if not isinstance(obj, dict):
        raise ConfigInvalid(path, "expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for k, v in obj.items():
        if k not in names:
            raise ConfigInvalid(f"{path}.{k}", "unknown field")
        default = getattr(cls(), k) if k != "apps" else None
        if isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigInvalid(f"{path}.{k}", f"expected boolean, got {v!r}")
        elif isinstance(default, int):
            _num(obj, k, path, integer=True, minimum=0)
        elif isinstance(default, float):
            _num(obj, k, path, minimum=0)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (PreconditionError, ValueError) as e:
        raise ConfigInvalid(path, str(e)) from None


def _so_profile(obj: Any, path: str) -> SoProfile | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ConfigInvalid(path, "expected an object")
    syms = obj.get("symbols", [])
    if not isinstance(syms, list):
        raise ConfigInvalid(f"{path}.symbols", "expected a list of [Ts, Tr] pairs")
    out = []
    for i, s in enumerate(syms):
        p = f"{path}.symbols[{i}]"
        if (not isinstance(s, list) or len(s) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in s)):
            raise ConfigInvalid(p, "expected [Ts, Tr]")
        if s[0] < 0 or s[1] < 0:
            raise ConfigInvalid(p, f"negative time {s}")
        out.append((float(s[0]), float(s[1])))
    load = _num(obj, "load_ms", path, minimum=0, default=0.0)
    shared = obj.get("shared", False)
    if not isinstance(shared, bool):
        raise ConfigInvalid(f"{path}.shared", "expected boolean")
    return SoProfile(symbols=out, load_ms=float(load), shared=shared)


def _xml_profile(obj: Any, path: str) -> XmlProfile | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ConfigInvalid(path, "expected an object")
    return XmlProfile(layout_alter_ms=float(_num(obj, "layout_alter_ms", path, minimum=0, default=0.0)),
                      render_ms=float(_num(obj, "render_ms", path, minimum=0, default=0.0)))


def _enum(enum, v, path: str):
    try:
        return enum[v] if isinstance(v, str) and v in enum.__members__ else enum(v)
    except (ValueError, KeyError):
        raise ConfigInvalid(path, f"unknown value {v!r}") from None


_APP_SCALARS = {
    "working_set_mb": float, "so_pages": int, "anon_pages": int, "shared_so_pages": int,
    "access_rate": float, "background_growth_kb_per_min": float,
}
_APP_FLAGS = ("time_critical", "batch", "root", "hardware", "init")


def _app(obj: Any, path: str) -> AppSpec:
    if not isinstance(obj, dict):
        raise ConfigInvalid(path, "expected an object")
    allowed = set(_APP_SCALARS) | set(_APP_FLAGS) | {
        "name", "role", "so_sharing_group", "so_profile", "xml_profile", "oom_band", "category"}
    for k in obj:
        if k not in allowed:
            raise ConfigInvalid(f"{path}.{k}", "unknown field")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigInvalid(f"{path}.name", "expected a non-empty string")
    kw: dict[str, Any] = {"name": name, "category": str(obj.get("category", ""))}
    for k, t in _APP_SCALARS.items():
        v = _num(obj, k, path, integer=t is int, minimum=0)
        if v is not None:
            kw[k] = t(v)
    for k in _APP_FLAGS:
        if k in obj:
            if not isinstance(obj[k], bool):
                raise ConfigInvalid(f"{path}.{k}", "expected boolean")
            kw[k] = obj[k]
    kw["role"] = _enum(Role, obj.get("role", "background"), f"{path}.role")
    kw["oom_band"] = _enum(OomBand, obj.get("oom_band", "CACHED"), f"{path}.oom_band")
    g = obj.get("so_sharing_group")
    if g is not None and (isinstance(g, bool) or not isinstance(g, int)):
        raise ConfigInvalid(f"{path}.so_sharing_group", "expected integer or null")
    kw["so_sharing_group"] = g
    kw["so_profile"] = _so_profile(obj.get("so_profile"), f"{path}.so_profile")
    kw["xml_profile"] = _xml_profile(obj.get("xml_profile"), f"{path}.xml_profile")
    spec = AppSpec(**kw)
    if spec.initial_pages < 1:
        raise ConfigInvalid(f"{path}.so_pages", "app must map at least one page")
    return spec


def from_dict(d: Any) -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ConfigInvalid("$", "expected an object")
    ver = d.get("schema_version")
    if ver != SCHEMA_VERSION:
        raise ConfigInvalid("schema_version", f"expected {SCHEMA_VERSION}, got {ver!r}")
    known = {"schema_version", "seed", "days", "burst_minutes", "policy", "device", "swap",
             "cleaner", "costs", "thresholds", "workload", "apps"}
    for k in d:
        if k not in known:
            raise ConfigInvalid(k, "unknown field")
    seed = _num(d, "seed", "", integer=True, minimum=0, default=42)
    if seed >= 1 << 64:
        raise ConfigInvalid("seed", "must fit in 64 bits")
    days = _num(d, "days", "", integer=True, minimum=1, default=28)
    burst = _num(d, "burst_minutes", "", integer=True, minimum=0, default=90)
    policy = _enum(Policy, d.get("policy", "SWAM"), "policy")
    device = _section(DeviceConfig, d.get("device"), "device")
    if device.zram_cap > device.ram:
        raise ConfigInvalid("device.zram_cap", "exceeds device.ram")
    if device.storage_used_other + device.nand_swap > device.storage:
        raise ConfigInvalid("device.storage", "smaller than storage_used_other + nand_swap")
    if not device.compression_ratio > 1:
        raise ConfigInvalid("device.compression_ratio", "must be > 1")
    if device.ram <= 0 or device.read_bw <= 0 or device.write_bw <= 0:
        raise ConfigInvalid("device", "ram and bandwidths must be positive")
    swap = _section(SwapPolicyConfig, d.get("swap"), "swap")
    cleaner = _section(CleanerConfig, d.get("cleaner"), "cleaner")
    costs = _section(CostConfig, d.get("costs"), "costs")
    thresholds = _section(Thresholds, d.get("thresholds"), "thresholds")
    if not 0 < thresholds.swap < thresholds.lmkd <= thresholds.oomk <= 1:
        raise ConfigInvalid("thresholds", "need 0 < swap < lmkd <= oomk <= 1")
    if not 0 <= thresholds.hysteresis < thresholds.swap:
        raise ConfigInvalid("thresholds.hysteresis", "must lie in [0, swap)")
    workload = _section(WorkloadConfig, d.get("workload"), "workload")
    if workload.idle_tick_minutes < 1 or workload.interact_period_s < 1:
        raise ConfigInvalid("workload", "tick and interaction periods must be >= 1")
    if workload.burst_start_minute + burst > 24 * 60:
        raise ConfigInvalid("burst_minutes", "burst runs past midnight")
    apps_raw = d.get("apps", [])
    if not isinstance(apps_raw, list):
        raise ConfigInvalid("apps", "expected a list")
    apps = [_app(a, f"apps[{i}]") for i, a in enumerate(apps_raw)]
    names = [a.name for a in apps]
    for i, n in enumerate(names):
        if names.index(n) != i:
            raise ConfigInvalid(f"apps[{i}].name", f"duplicate name {n!r}")
    return ScenarioConfig(device=device, apps=apps, days=days, burst_minutes=burst, seed=seed,
                          policy=policy, swap=swap, cleaner=cleaner, costs=costs,
                          thresholds=thresholds, workload=workload)


def _plain(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


def app_to_dict(a: AppSpec) -> dict:
    d: dict[str, Any] = {"name": a.name, "category": a.category, "role": a.role.value,
                         "oom_band": a.oom_band.name, "so_sharing_group": a.so_sharing_group}
    for k in _APP_SCALARS:
        d[k] = getattr(a, k)
    for k in _APP_FLAGS:
        d[k] = getattr(a, k)
    if a.so_profile is not None:
        d["so_profile"] = {"symbols": [list(s) for s in a.so_profile.symbols],
                           "load_ms": a.so_profile.load_ms, "shared": a.so_profile.shared}
    if a.xml_profile is not None:
        d["xml_profile"] = {"layout_alter_ms": a.xml_profile.layout_alter_ms,
                            "render_ms": a.xml_profile.render_ms}
    return d


def to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION, "seed": cfg.seed, "days": cfg.days,
        "burst_minutes": cfg.burst_minutes, "policy": cfg.policy.value,
        "device": _plain(cfg.device), "swap": _plain(cfg.swap), "cleaner": _plain(cfg.cleaner),
        "costs": _plain(cfg.costs), "thresholds": _plain(cfg.thresholds),
        "workload": _plain(cfg.workload), "apps": [app_to_dict(a) for a in cfg.apps],
    }


def dumps(cfg: ScenarioConfig) -> str:
    """Readable JSON: sections indented, one line per app."""
    d = to_dict(cfg)
    apps = d.pop("apps")
    body = json.dumps(d, indent=2)[:-2]
    lines = ",\n".join("    " + json.dumps(a, separators=(",", ":")) for a in apps)
    return body + ',\n  "apps": [\n' + lines + "\n  ]\n}\n"


def load(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigInvalid("$", f"cannot read {path}: {e.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigInvalid("$", f"not valid JSON (line {e.lineno}): {e.msg}") from None
    return from_dict(d)


def save(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")
