import json
import subprocess
import sys
from dataclasses import replace

import pytest

from peerbias.cli import main as cli_main
from peerbias.harness import (CSV_HEADER, SCENARIOS, ScenarioConfig,
                              read_csv_rows, run_scenario, write_csv)


def _tiny(scenario, iterations=6, grid=None):
    cfg = SCENARIOS[scenario].default_config(profile="ci")
    cfg = replace(cfg, iterations=iterations)
    if grid is not None:
        cfg = replace(cfg, sweep_grid=grid)
    return cfg


def test_registry_has_fourteen_scenarios():
    assert len(SCENARIOS) == 14
    expected = {"fig1a", "fig1b", "fig1c", "fig2a", "fig2b", "fig2c", "fig3a",
                "fig3b", "fig4a", "fig4b", "fig5a", "fig5b",
                "null-calibration", "proposition-b"}
    assert set(SCENARIOS) == expected


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig("x", "n", (), 10, 0, ("counting",))
    with pytest.raises(ValueError):
        ScenarioConfig("x", "n", (1,), 0, 0, ("counting",))


def test_run_scenario_deterministic_across_workers():
    cfg = _tiny("null-calibration", iterations=12)
    serial = run_scenario(cfg, workers=1)
    parallel = run_scenario(cfg, workers=2)
    assert serial == parallel
    assert serial == run_scenario(cfg, workers=1)


def test_single_iteration_schema_complete():
    cfg = _tiny("fig2a", iterations=1, grid=(0.0,))
    res = run_scenario(cfg, workers=1)
    assert {r.test for r in res.rows} == {"baseline", "disagreement"}
    for r in res.rows:
        assert r.iters == 1
        assert r.rejection_rate in (0.0, 1.0)


def test_rows_cover_grid_times_tests():
    cfg = _tiny("fig3a", iterations=2)
    res = run_scenario(cfg, workers=1)
    assert len(res.rows) == len(cfg.sweep_grid) * len(cfg.tests)
    assert res.rate("baseline", "blind") <= 1.0


def test_unknown_scenario_raises():
    cfg = replace(_tiny("fig2a", 1, (0.0,)), scenario="nosuch")
    with pytest.raises(KeyError):
        run_scenario(cfg, workers=1)


def test_fig5_readings_share_streams():
    a = run_scenario(_tiny("fig5a", iterations=8), workers=1)
    b = run_scenario(_tiny("fig5b", iterations=8), workers=1)
    for ra, rb in zip(a.rows, b.rows):
        assert ra.rejection_rate == rb.rejection_rate
        assert ra.mean_effect == rb.mean_effect


def test_csv_contract(tmp_path):
    res = run_scenario(_tiny("fig5a", iterations=3), workers=1)
    path = tmp_path / "out.csv"
    write_csv(res, path)
    raw = path.read_bytes()
    assert raw.startswith(CSV_HEADER.encode() + b"\n")
    assert b"\r" not in raw
    rows = read_csv_rows(path)
    assert len(rows) == 4  # two tests x two instances
    for parsed, row in zip(rows, res.rows):
        assert float(parsed["rejection_rate"]) == float(f"{row.rejection_rate:.6g}")
        assert float(parsed["mean_effect"]) == float(f"{row.mean_effect:.6g}")
        assert int(parsed["iters"]) == row.iters


def test_runtime_scales_linearly_in_iterations():
    import time
    cfg_small = _tiny("null-calibration", iterations=150)
    cfg_big = _tiny("null-calibration", iterations=450)
    run_scenario(cfg_small, workers=1)  # warm caches
    t0 = time.perf_counter()
    run_scenario(cfg_small, workers=1)
    small = time.perf_counter() - t0
    t0 = time.perf_counter()
    run_scenario(cfg_big, workers=1)
    big = time.perf_counter() - t0
    # 3x the iterations should cost 3x the time, within 30 percent
    assert 3 * 0.7 < big / small < 3 * 1.3, (small, big)


def test_ci_profile_shrinks_workload():
    full = SCENARIOS["fig2a"].default_config(profile="full")
    ci = SCENARIOS["fig2a"].default_config(profile="ci")
    assert full.iterations == 5000 and ci.iterations == 1000
    assert ci.params["n"] == full.params["n"] // 2
    swept = SCENARIOS["fig1a"].default_config(profile="ci")
    assert swept.sweep_grid == tuple(v // 2 for v in SCENARIOS["fig1a"].sweep_grid)


# ------------------------------------------------------------------- the CLI

def test_cli_list_scenarios(capsys):
    assert cli_main(["list-scenarios"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 14
    assert "fig2a" in out


def test_cli_describe(capsys):
    assert cli_main(["describe", "--scenario", "fig2c"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["sweep_name"] == "mu"
    assert payload["sweep_grid"] == [1, 5, 10, 15, 20, 40, 60]
    assert "description" in payload


def test_cli_unknown_scenario_exits_2(capsys):
    assert cli_main(["simulate", "--scenario", "nosuch"]) == 2
    assert "unknown scenario" in capsys.readouterr().err


def test_cli_bad_flag_exits_2():
    proc = subprocess.run(
        [sys.executable, "-m", "peerbias.cli", "simulate", "--bogus"],
        capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stderr.lower()


def test_cli_simulate_deterministic(tmp_path):
    args = ["simulate", "--scenario", "null-calibration", "--iters", "10",
            "--seed", "7", "--profile", "ci", "--workers", "1"]
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    assert cli_main(args + ["--out", str(p1)]) == 0
    assert cli_main(args + ["--out", str(p2)]) == 0
    assert p1.read_bytes() == p2.read_bytes()


def test_cli_simulate_stdout(capsys):
    code = cli_main(["simulate", "--scenario", "null-calibration", "--iters", "2",
                     "--profile", "ci", "--workers", "1",
                     "--set", "params.n=40"])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == CSV_HEADER
    assert len(out) == 3  # header + two tests on the single sweep point


def test_cli_set_overrides(tmp_path):
    out = tmp_path / "o.csv"
    code = cli_main(["simulate", "--scenario", "fig2a", "--iters", "2",
                     "--profile", "ci", "--workers", "1",
                     "--set", "params.n=60", "--set", "sweep_grid=[0.0]",
                     "--out", str(out)])
    assert code == 0
    rows = read_csv_rows(out)
    assert len(rows) == 2
    assert rows[0]["sweep_value"] == "0"


def test_cli_config_file(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"iterations": 3, "params.n": 40,
                                    "sweep_grid": [0.0]}))
    out = tmp_path / "o.csv"
    code = cli_main(["simulate", "--scenario", "fig2a", "--profile", "ci",
                     "--workers", "1", "--config", str(cfg_path),
                     "--out", str(out)])
    assert code == 0
    assert read_csv_rows(out)[0]["iters"] == "3"


def test_cli_bad_set_exits_2(capsys):
    assert cli_main(["simulate", "--scenario", "fig2a",
                     "--set", "nonsense=1"]) == 2
