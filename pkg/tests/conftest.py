from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from mapfdecomp.grid import GridMap, Instance, load_map, make_instance, parse_scenario

DATA = Path(__file__).parent / "data"
SYNTHETIC = DATA / "synthetic"

# Two free grid groups (0f left of the wall gap, 1f right of it).  Agent 1's
# target sits on the only route agent 0 has, agent 2 only needs 1f.
FIG2_MAP = """type octile
height 2
width 9
map
.........
@@@@.@...
"""
FIG2_TASKS = [((0, 0), (8, 0)), ((4, 1), (3, 0)), ((6, 1), (8, 1))]


def fig2_instance() -> Instance:
    return make_instance(load_map(FIG2_MAP), FIG2_TASKS)


@pytest.fixture
def fig2() -> Instance:
    return fig2_instance()


def grid_from_rows(*rows: str) -> GridMap:
    """Rows read top to bottom; ``x`` is the column, ``y`` the row."""
    return GridMap(np.array([[c == "." for c in row] for row in rows], dtype=bool).T)


def synthetic(name: str):
    grid = load_map((SYNTHETIC / f"{name}.map").read_text())
    rows = parse_scenario((SYNTHETIC / f"{name}.scen").read_text(), grid)
    return grid, rows


def random_instance(grid: GridMap, k: int, rng: np.random.Generator) -> Instance | None:
    """k agents with distinct cells drawn from one connected region; None if it is too small."""
    from scipy import ndimage

    labels, n = ndimage.label(grid.passable)
    if n == 0:
        return None
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    cells = np.argwhere(labels == int(np.argmax(sizes)))
    if len(cells) < 2 * k:
        return None
    pick = rng.choice(len(cells), size=2 * k, replace=False)
    chosen = [tuple(int(v) for v in cells[i]) for i in pick]
    return make_instance(grid, list(zip(chosen[:k], chosen[k:])))


def single_level_instances(count: int = 3):
    """A one-agent instance, then ``count`` multi-agent ones that decompose into a single level."""
    from mapfdecomp.decompose import UnsolvableInstanceError, decompose_instance

    yield make_instance(GridMap(np.ones((5, 5), dtype=bool)), [((0, 0), (4, 4))])
    rng = np.random.default_rng(7)
    found = 0
    for _ in range(2000):
        inst = random_instance(GridMap(rng.random((5, 5)) >= 0.3), 3, rng)
        if inst is None:
            continue
        try:
            levels = decompose_instance(inst).levels
        except UnsolvableInstanceError:
            continue
        if len(levels) == 1:
            found += 1
            yield inst
            if found == count:
                return
    raise AssertionError(f"only {found} single-level fixtures found")


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
