"""Relaunch-cost estimation from shared-object and XML-UI profiles.

A killed app pays two dominant costs when it comes back: resolving the
symbols of its native libraries (lookup + relocation per symbol, plus the
load of each .so file) and converting its compiled XML layouts into a
rendered UI.  Profiles are captured once, on first launch, and feed the
EOOM victim choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rng import SplitMix64

# Share of per-symbol work spent searching vs. building GOT entries.
LOOKUP_SHARE = 0.65
RELOCATE_SHARE = 0.35
# Share of XML-UI conversion spent interpreting layouts vs. rendering.
LAYOUT_SHARE = 0.12
RENDER_SHARE = 0.88


@dataclass
class SoProfile:
    symbols: list[tuple[float, float]] = field(default_factory=list)  # (Ts, Tr) ms
    load_ms: float = 0.0  # Tl
    shared: bool = False

    def __post_init__(self) -> None:
        self.symbols = [(float(ts), float(tr)) for ts, tr in self.symbols]
        for i, (ts, tr) in enumerate(self.symbols):
            if ts < 0 or tr < 0:
                raise ValueError(f"symbols[{i}]: negative time ({ts}, {tr})")
        if self.load_ms < 0:
            raise ValueError(f"load_ms: negative ({self.load_ms})")

    @property
    def symbol_work_ms(self) -> float:
        return sum(ts + tr for ts, tr in self.symbols)


@dataclass
class XmlProfile:
    layout_alter_ms: float = 0.0
    render_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.layout_alter_ms < 0 or self.render_ms < 0:
            raise ValueError("XmlProfile times must be >= 0")


@dataclass
class CostConfig:
    base_restart_ms: float = 200.0
    so_weight: float = 1.0
    xml_weight: float = 1.0


def estimate_so_cost(p: SoProfile) -> float:
    """T = sum over symbols of (Ts + Tr), plus Tl."""
    return sum(ts + tr for ts, tr in p.symbols) + p.load_ms


def estimate_xml_cost(p: XmlProfile) -> float:
    return p.layout_alter_ms + p.render_ms


def relaunch_cost(app, cfg: CostConfig | None = None) -> float:
    """Estimated time (ms) to bring ``app`` back after a kill."""
    cfg = cfg or CostConfig()
    so = estimate_so_cost(app.so_profile) if app.so_profile is not None else 0.0
    xml = estimate_xml_cost(app.xml_profile) if app.xml_profile is not None else 0.0
    return cfg.so_weight * so + cfg.xml_weight * xml + cfg.base_restart_ms


def so_rebuild_cost(p: SoProfile | None, n_pages: int, n_so_pages: int) -> float:
    """PLT/GOT rebuild cost when ``n_pages`` of an app's ``n_so_pages`` SO pages reload.

    Symbols and file loads are assumed spread evenly over the SO pages, so
    the full lookup cost is charged pro rata; reloading every SO page
    costs exactly ``estimate_so_cost``.
    """
    if p is None or n_pages <= 0:
        return 0.0
    frac = min(n_pages, n_so_pages) / n_so_pages if n_so_pages > 0 else 1.0
    return frac * estimate_so_cost(p)


def make_so_profile(rng: SplitMix64, n_symbols: int, mean_symbol_ms: float,
                    load_ms: float, shared: bool = False) -> SoProfile:
    """Synthetic profile whose lookup/relocation split is exactly 65/35."""
    symbols = []
    for _ in range(n_symbols):
        w = mean_symbol_ms * rng.uniform(0.5, 1.5)
        symbols.append((round(w * LOOKUP_SHARE, 6), round(w * RELOCATE_SHARE, 6)))
    return SoProfile(symbols=symbols, load_ms=load_ms, shared=shared)


def make_xml_profile(total_ms: float) -> XmlProfile:
    return XmlProfile(layout_alter_ms=round(total_ms * LAYOUT_SHARE, 6),
                      render_ms=round(total_ms * RENDER_SHARE, 6))
