import json
import time

import numpy as np
import pytest

from conftest import SYNTHETIC, synthetic
from mapfdecomp.bench.memory import PeakMemorySampler, sample_peak_memory
from mapfdecomp.bench.records import HEADER, RunRecord, emit_csv, read_csv
from mapfdecomp.bench.runner import BenchConfig, run_benchmark, run_once, sample_tasks
from mapfdecomp.cli import main
from mapfdecomp.grid import Instance, load_map
from mapfdecomp.layered import SolverKind
from mapfdecomp.solvers import Solution

MAP = SYNTHETIC / "random-32-32-20.map"
SCEN = SYNTHETIC / "random-32-32-20.scen"
MiB = 1 << 20


def config(**kw):
    base = dict(maps=[MAP], scens=[SCEN], agent_counts=[10], repetitions=1, timeout=30.0)
    base.update(kw)
    return BenchConfig(**base)


def test_one_tuple_two_methods():
    records = run_benchmark(config())
    assert [(r.method, r.solver) for r in records] == [("raw", "serial"), ("layered", "serial")]
    for r in records:
        assert r.map_name == "random-32-32-20" and r.agents == 10
        assert r.success and r.soc >= r.makespan >= 1


def test_layered_rates_monotone():
    records = run_benchmark(config(agent_counts=[20, 40], methods=["layered"], solvers=[SolverKind.SERIAL, SolverKind.PARALLEL]))
    assert len(records) == 4
    for r in records:
        assert 0 < r.rate_step3 <= r.rate_step2 <= r.rate_step1 <= 1
        assert r.subproblems_step1 <= r.subproblems_step2 <= r.subproblems_step3


def test_timeout_run_fails_without_quality_fields():
    grid, rows = synthetic("random-32-32-20")
    inst = Instance(grid, sample_tasks(rows, 40, 0, "random-32-32-20", 0))
    for method in ("raw", "layered"):
        rec = run_once(inst, method, SolverKind.SERIAL, 1e-6)
        assert not rec.success and rec.timed_out
        assert rec.soc is None and rec.makespan is None


def test_sampling_is_deterministic():
    _, rows = synthetic("room-32-32-4")
    a = sample_tasks(rows, 30, 3, "room-32-32-4", 1)
    assert a == sample_tasks(rows, 30, 3, "room-32-32-4", 1)
    assert a != sample_tasks(rows, 30, 3, "room-32-32-4", 2)
    assert len({t.start for t in a}) == 30


def test_same_seed_same_metrics():
    strip = lambda r: (r.success, r.soc, r.makespan, r.rate_step1, r.rate_step2, r.rate_step3)
    first = run_benchmark(config(repetitions=2))
    second = run_benchmark(config(repetitions=2))
    assert [strip(r) for r in first] == [strip(r) for r in second]


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        config(timeout=0)
    with pytest.raises(ValueError):
        config(repetitions=0)
    with pytest.raises(ValueError):
        config(methods=["fast"])


def test_missing_file_aborts(tmp_path):
    with pytest.raises(OSError):
        run_benchmark(config(maps=[tmp_path / "nope.map"]))


# --- memory ---------------------------------------------------------------


def test_idle_run_reports_zero():
    if not PeakMemorySampler.supported():
        pytest.skip("RSS not readable here")
    _, peak = sample_peak_memory(lambda: None)
    assert peak == 0


def test_known_allocation_is_seen():
    if not PeakMemorySampler.supported():
        pytest.skip("RSS not readable here")

    def grab():
        block = np.ones(64 * MiB, dtype=np.uint8)
        time.sleep(0.05)  # keep it resident for a few samples
        return int(block[::4096].sum())

    total, peak = sample_peak_memory(grab)
    assert total == 64 * MiB // 4096
    assert peak >= 64 * MiB


def test_unsupported_host_gives_marker(monkeypatch):
    monkeypatch.setattr(PeakMemorySampler, "supported", staticmethod(lambda: False))
    result, peak = sample_peak_memory(lambda: 5)
    assert result == 5 and peak is None


# --- csv --------------------------------------------------------------------


def record(**kw):
    base = dict(map_name="m", agents=3, method="raw", solver="serial", rep=0, seed=1, success=True, time_ms=1.5, soc=7, makespan=3)
    base.update(kw)
    return RunRecord(**base)


def test_csv_one_record(tmp_path):
    path = tmp_path / "out.csv"
    emit_csv([record()], path)
    lines = path.read_bytes().split(b"\r\n")
    assert lines[-1] == b""
    assert len(lines) == 3
    assert lines[0].decode().split(",") == HEADER


def test_csv_round_trip(tmp_path):
    recs = [
        record(),
        record(method="layered", rate_step1=0.5, rate_step2=0.25, rate_step3=0.1, decomp_ms_step1=0.1, subproblems_step3=9, peak_memory_bytes=4096),
        record(map_name="a,b", success=False, soc=None, makespan=None, timed_out=True),
    ]
    path = tmp_path / "out.csv"
    emit_csv(recs, path)
    assert read_csv(path) == recs


def test_csv_empty_memory_cell(tmp_path):
    path = tmp_path / "out.csv"
    emit_csv([record(peak_memory_bytes=None)], path)
    row = path.read_text().splitlines()[1].split(",")
    assert row[HEADER.index("peak_memory_bytes")] == ""
    emit_csv([record(peak_memory_bytes=0)], path)
    assert path.read_text().splitlines()[1].split(",")[HEADER.index("peak_memory_bytes")] == "0"


def test_csv_needs_records(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "x.csv")


# --- cli --------------------------------------------------------------------


def test_cli_bench(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code = main(["bench", "--map", str(MAP), "--scen", str(SCEN), "--agents", "5,10", "--out", str(out)])
    assert code == 0
    recs = read_csv(out)
    assert len(recs) == 4 and all(r.success for r in recs)


def test_cli_bench_bad_input(tmp_path):
    assert main(["bench", "--map", str(tmp_path / "x.map"), "--scen", str(SCEN), "--agents", "5", "--out", str(tmp_path / "o.csv")]) == 2
    with pytest.raises(SystemExit):
        main(["bench", "--map", str(MAP), "--scen", str(SCEN), "--agents", "0", "--out", "o.csv"])


def test_cli_solve_then_validate(tmp_path, capsys):
    sol = tmp_path / "sol.txt"
    args = ["--map", str(MAP), "--scen", str(SCEN), "--agents", "15"]
    for solver in ("serial", "parallel"):
        assert main(["solve", *args, "--solver", solver, "--out", str(sol)]) == 0
        assert main(["validate", "--map", str(MAP), "--scen", str(SCEN), "--solution", str(sol)]) == 0
    solution = Solution.from_text(sol.read_text())
    assert len(solution.paths) == 15
    # break it: agent 1 teleports onto agent 0's start at t=0
    paths = dict(solution.paths)
    paths[1] = (paths[0][0],) + paths[1][1:]
    sol.write_text(Solution(paths).to_text())
    assert main(["validate", "--map", str(MAP), "--scen", str(SCEN), "--solution", str(sol)]) == 1


def test_cli_decompose_report(tmp_path, capsys):
    assert main(["decompose", "--map", str(MAP), "--scen", str(SCEN), "--agents", "30"]) == 0
    report = capsys.readouterr().out.splitlines()
    assert report[0].startswith("step 1: rate=")
    assert report[2].startswith("step 3: rate=")
    agents = sorted(a for line in report[3:] for a in json.loads(line.split(": ", 1)[1]))
    assert agents == list(range(30))


def test_cli_generate(tmp_path):
    assert main(["generate", str(tmp_path), "empty-16-16", "--rows", "50"]) == 0
    grid = load_map((tmp_path / "empty-16-16.map").read_text())
    assert grid.free_count == 256
    lines = (tmp_path / "empty-16-16.scen").read_text().splitlines()
    assert lines[0] == "version 1" and 45 < len(lines) <= 51
