import csv
import json

import pytest

from swamsim import config
from swamsim.cli import main
from swamsim.workload import reference_scenario

ONE_DAY = "scenarios/one_day.json"


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_run_one_day(tmp_path):
    assert main(["run", "--scenario", ONE_DAY, "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "metrics.csv")
    assert rows[0] == ["policy", "day", "kills_cumulative", "mean_free_mb", "mean_launch_ms",
                       "mean_response_ms", "zram_used_mb", "swam_used_mb"]
    assert len(rows) == 2 and rows[1][:2] == ["SWAM", "1"]
    s = json.loads((tmp_path / "summary.json").read_text())
    assert sum(s["kills_per_app"].values()) == s["total_kills"]
    kills = [json.loads(l) for l in open(tmp_path / "events.jsonl") if '"kill"' in l]
    assert len([k for k in kills if k["type"] == "kill"]) == s["total_kills"]


def test_run_policy_and_seed_override(tmp_path):
    assert main(["run", "--scenario", ONE_DAY, "--out", str(tmp_path), "--policy", "zram-nand",
                 "--seed", "11"]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["policy"] == "ZRAM_NAND" and s["seed"] == 11


def test_malformed_file_exit_1(tmp_path, capsys):
    d = config.to_dict(reference_scenario(days=1))
    d["apps"][4]["access_rate"] = "fast"
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    assert main(["run", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "apps[4].access_rate" in capsys.readouterr().err


def test_validate_ok(capsys):
    assert main(["validate", "--scenario", ONE_DAY]) == 0
    assert json.loads(capsys.readouterr().out)["days"] == 1


def test_validate_zram_bigger_than_ram(tmp_path, capsys):
    d = config.to_dict(reference_scenario(days=1))
    d["device"]["zram_cap"] = 2 * d["device"]["ram"]
    p = tmp_path / "z.json"
    p.write_text(json.dumps(d))
    assert main(["validate", "--scenario", str(p)]) == 1
    assert "device.zram_cap" in capsys.readouterr().err


def test_validate_negative_ts_names_app_and_symbol(tmp_path, capsys):
    d = config.to_dict(reference_scenario(days=1))
    d["apps"][6]["so_profile"]["symbols"][12][0] = -0.5
    p = tmp_path / "n.json"
    p.write_text(json.dumps(d))
    assert main(["validate", "--scenario", str(p)]) == 1
    assert "apps[6].so_profile.symbols[12]" in capsys.readouterr().err


def test_compare_single_policy_is_usage_error(tmp_path, capsys):
    assert main(["compare", "--scenario", ONE_DAY, "--policies", "SWAM", "--out", str(tmp_path)]) == 1
    assert "at least two" in capsys.readouterr().err


def test_unknown_policy_is_usage_error(tmp_path):
    assert main(["compare", "--scenario", ONE_DAY, "--policies", "SWAM,FAST",
                 "--out", str(tmp_path)]) == 1


def test_missing_flag_exits_1():
    with pytest.raises(SystemExit) as e:
        main(["run", "--scenario", ONE_DAY])
    assert e.value.code == 1


def test_compare_two_policies(tmp_path):
    assert main(["compare", "--scenario", ONE_DAY, "--policies", "SWAM,ZRAM",
                 "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "compare.csv")
    assert [r[0] for r in rows[1:]] == ["SWAM", "ZRAM"]
    assert rows[1][-1] == rows[2][-1] and len(rows[1][-1]) == 64
    metrics = _read_csv(tmp_path / "metrics.csv")
    assert [r[0] for r in metrics[1:]] == ["SWAM", "ZRAM"]


def test_panic_exit_2(tmp_path):
    d = config.to_dict(reference_scenario(days=1))
    for a in d["apps"]:
        a["init"] = True  # nothing may be killed
    d["device"]["zram_cap"] = 0
    d["device"]["storage_used_other"] = d["device"]["storage"]
    d["device"]["nand_swap"] = 0
    p = tmp_path / "p.json"
    p.write_text(json.dumps(d))
    assert main(["run", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 2
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["panic"]
