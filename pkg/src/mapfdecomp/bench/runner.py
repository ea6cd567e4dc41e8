from __future__ import annotations

import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..grid import AgentTask, GridMap, Instance, ScenarioRow, load_map, parse_scenario, select_rows
from ..layered import SolverKind, layered_solve, raw_solve
from ..solvers import SolverTimeout, validate_solution
from .memory import sample_peak_memory
from .records import RunRecord

log = logging.getLogger(__name__)

METHODS = ("raw", "layered")


@dataclass
class BenchConfig:
    maps: list[Path]
    scens: list[Path]
    agent_counts: list[int]
    repetitions: int = 1
    timeout: float = 30.0  # seconds
    methods: Sequence[str] = METHODS
    solvers: Sequence[SolverKind] = (SolverKind.SERIAL,)
    seed: int = 0
    output: Path | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if len(self.maps) != len(self.scens):
            raise ValueError("every map needs exactly one scenario file")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")


def sample_tasks(rows: Sequence[ScenarioRow], count: int, seed: int, map_name: str, rep: int) -> list[AgentTask]:
    """Seeded draw of ``count`` scenario rows without replacement.

    The generator is numpy's PCG64 seeded with
    ``SeedSequence([seed, crc32(map_name), count, rep])``, so draws are
    reproducible across machines.  Rows are visited in permuted order and the
    usual start/target collision rule skips rows as needed.
    """
    seq = np.random.SeedSequence([seed, zlib.crc32(map_name.encode()), count, rep])
    rng = np.random.Generator(np.random.PCG64(seq))
    perm = rng.permutation(len(rows))
    return select_rows((rows[i] for i in perm), count)


def run_once(instance: Instance, method: str, kind: SolverKind, timeout: float) -> RunRecord:
    """Run one method under ``timeout`` seconds; map/agents/rep/seed fields are left for the caller."""
    rec = RunRecord(map_name="", agents=instance.k, method=method, solver=kind.value, rep=0, seed=0, success=False)

    def work():
        if method == "layered":
            return layered_solve(instance, kind=kind, deadline=timeout)
        try:
            return raw_solve(instance, kind, deadline=timeout)
        except SolverTimeout:
            rec.timed_out = True
            return None

    t0 = time.perf_counter()
    try:
        result, peak = sample_peak_memory(work)
    except MemoryError:
        result, peak = None, None
    elapsed = time.perf_counter() - t0
    rec.time_ms = elapsed * 1000.0
    rec.peak_memory_bytes = peak

    solution = result
    if method == "layered":
        outcome = result
        d = outcome.decomposition
        rec.timed_out = outcome.timed_out
        rec.decomp_ms_step1, rec.decomp_ms_step2, rec.decomp_ms_step3 = (s * 1000.0 for s in d.step_seconds)
        rec.rate_step1, rec.rate_step2, rec.rate_step3 = (s.rate for s in d.step_stats)
        rec.subproblems_step1, rec.subproblems_step2, rec.subproblems_step3 = (s.count for s in d.step_stats)
        solution = outcome.solution

    if solution is not None and elapsed > timeout:
        rec.timed_out = True
        solution = None
    if solution is not None and validate_solution(instance.map, instance.tasks, solution):
        log.warning("discarding %s/%s solution that failed validation", method, kind.value)
        solution = None
    if solution is not None:
        rec.success = True
        rec.soc = solution.soc
        rec.makespan = solution.makespan
    return rec


def _load(map_path: Path, scen_path: Path) -> tuple[GridMap, list[ScenarioRow]]:
    grid = load_map(Path(map_path).read_text())
    rows = parse_scenario(Path(scen_path).read_text(), grid)
    return grid, rows


def _run_tuple(args) -> list[RunRecord]:
    map_path, scen_path, count, rep, config = args
    grid, rows = _load(map_path, scen_path)
    name = Path(map_path).stem
    tasks = sample_tasks(rows, count, config.seed, name, rep)
    instance = Instance(grid, tasks)
    records = []
    for kind in config.solvers:
        for method in config.methods:
            rec = run_once(instance, method, kind, config.timeout)
            rec.map_name, rec.rep, rec.seed = name, rep, config.seed
            log.info(
                "%s k=%d rep=%d %s/%s success=%s %.1f ms",
                name, count, rep, method, kind.value, rec.success, rec.time_ms,
            )
            records.append(rec)
    return records


def run_benchmark(config: BenchConfig) -> list[RunRecord]:
    # parse everything up front so I/O and format errors abort before any run
    for map_path, scen_path in zip(config.maps, config.scens):
        _load(map_path, scen_path)
    work = [
        (m, s, count, rep, config)
        for m, s in zip(config.maps, config.scens)
        for count in config.agent_counts
        for rep in range(config.repetitions)
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            batches = list(pool.map(_run_tuple, work))
    else:
        batches = [_run_tuple(item) for item in work]
    return [rec for batch in batches for rec in batch]
