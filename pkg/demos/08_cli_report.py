"""
Command line and report files
=============================

``swamsim`` validates scenario files, runs one policy and compares
several.  Outputs are plain CSV/JSON meant for plotting elsewhere.
"""

# %%
import tempfile
from pathlib import Path

from swamsim.cli import main

scenario = str(Path(__file__).resolve().parent.parent / "scenarios" / "one_day.json")

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    main(["run", "--scenario", scenario, "--out", str(out / "run")])
    print((out / "run" / "metrics.csv").read_text())
    main(["compare", "--scenario", scenario, "--policies", "ZRAM,SWAM", "--out", str(out / "cmp")])
    print((out / "cmp" / "compare.csv").read_text())
    events = (out / "run" / "events.jsonl").read_text().splitlines()
    print(len(events), "event records, first:", events[0])
