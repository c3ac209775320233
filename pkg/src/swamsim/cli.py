"""``swamsim`` command line: run, compare and validate scenarios.

Exit status: 0 success, 1 invalid scenario or usage, 2 the simulated
system panicked (outputs up to the panic are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config
from .config import ConfigInvalid
from .engine import run as run_engine
from .report import (COMPARE_COLUMNS, compare_rows, daily_rows, summary, write_csv, write_events,
                     write_metrics_csv, write_summary)
from .workload import Policy, generate, trace_hash

log = logging.getLogger("swamsim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors share exit status 1 with bad configs
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_policy(s: str) -> Policy:
    key = s.strip().upper().replace("-", "_").replace("/", "_")
    try:
        return Policy[key]
    except KeyError:
        raise UsageError(f"unknown policy {s!r} (choose from "
                         f"{', '.join(p.value for p in Policy)})") from None


def _load(path: str, seed: int | None = None):
    cfg = config.load(path)
    if seed is not None:
        if not 0 <= seed < 1 << 64:
            raise ConfigInvalid("seed", "must fit in 64 bits")
        cfg.seed = seed
    return cfg


def cmd_run(scenario: str, out: str, seed: int | None = None, policy: str | None = None) -> int:
    cfg = _load(scenario, seed)
    if policy is not None:
        cfg.policy = parse_policy(policy)
    trace = generate(cfg)
    h = trace_hash(trace)
    m = run_engine(cfg, trace, cfg.policy)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out_dir / "metrics.csv", daily_rows(m))
    write_events(out_dir / "events.jsonl", m)
    write_summary(out_dir / "summary.json", summary(m, cfg, h))
    if m.panic:
        print(f"system panic at t={m.panic_time} ms: {m.panic}", file=sys.stderr)
        return 2
    return 0


def cmd_compare(scenario: str, policies: list[str], out: str, seed: int | None = None) -> int:
    if len(policies) < 2:
        raise UsageError("compare needs at least two policies")
    pols = [parse_policy(p) for p in policies]
    if len(set(pols)) != len(pols):
        raise UsageError("policies must be distinct")
    cfg = _load(scenario, seed)
    trace = generate(cfg)  # one trace shared by every policy
    h = trace_hash(trace)
    runs = []
    for p in pols:
        log.info("running %s", p.value)
        m = run_engine(cfg, trace, p)
        runs.append((m, summary(m, cfg, h)))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out_dir / "metrics.csv", [r for m, _ in runs for r in daily_rows(m)])
    write_csv(out_dir / "compare.csv", COMPARE_COLUMNS, compare_rows(runs))
    panics = [s["policy"] for _, s in runs if s["panic"]]
    if panics:
        print(f"system panic under {', '.join(panics)}", file=sys.stderr)
        return 2
    return 0


def cmd_validate(scenario: str) -> int:
    cfg = config.load(scenario)
    print(json.dumps(config.to_dict(cfg), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="swamsim", description="Simulate mobile memory reclamation policies.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run one scenario under one policy")
    r.add_argument("--scenario", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--policy")
    c = sub.add_parser("compare", help="run several policies on the same trace")
    c.add_argument("--scenario", required=True)
    c.add_argument("--policies", required=True, help="comma-separated, e.g. SWAM,ZRAM")
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int)
    v = sub.add_parser("validate", help="check a scenario file and print it normalised")
    v.add_argument("--scenario", required=True)
    return p


def _setup_logging() -> None:
    level = os.environ.get("SWAMSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return cmd_run(args.scenario, args.out, args.seed, args.policy)
        if args.cmd == "compare":
            pols = [s for s in args.policies.split(",") if s.strip()]
            return cmd_compare(args.scenario, pols, args.out, args.seed)
        return cmd_validate(args.scenario)
    except ConfigInvalid as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return 1
    except UsageError as e:
        print(f"swamsim: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
