"""Grid world, MovingAI ``.map``/``.scen`` ingestion and the solvability precheck.

Coordinates are plain tuples of ints, one entry per axis.  Internally every
cell also has a row-major linear index into the ``passable`` table; the
solvers and the connectivity graph work on those indices for speed.
"""
from __future__ import annotations

from array import array
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

Coord = tuple[int, ...]

PASSABLE_CHARS = frozenset(".GS")
UNPASSABLE_CHARS = frozenset("@OTW")


class MapFormatError(ValueError):
    """Raised for malformed ``.map`` or ``.scen`` input; carries the 1-based line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ScenarioError(ValueError):
    """Scenario rows cannot produce the requested instance."""


@dataclass(frozen=True, eq=False)
class GridMap:
    """N-dimensional passable/unpassable grid with a 2N-neighborhood.

    ``passable`` has shape ``dims`` and is indexed by coordinate, so for a
    2-D map loaded from a ``.map`` file ``passable[x, y]`` is row ``y``,
    column ``x``.
    """

    passable: np.ndarray

    def __post_init__(self):
        arr = np.array(self.passable, dtype=bool)
        if arr.ndim < 2:
            raise ValueError("grid needs at least two dimensions")
        if min(arr.shape) < 1:
            raise ValueError("every axis needs at least one cell")
        arr.setflags(write=False)
        object.__setattr__(self, "passable", arr)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.passable.shape)

    @property
    def ndim(self) -> int:
        return self.passable.ndim

    @cached_property
    def free_count(self) -> int:
        return int(self.passable.sum())

    def in_bounds(self, g: Sequence[int]) -> bool:
        return len(g) == self.ndim and all(0 <= x < d for x, d in zip(g, self.dims))

    def is_passable(self, g: Sequence[int]) -> bool:
        # out-of-bounds cells count as unpassable
        return self.in_bounds(g) and bool(self.passable[tuple(g)])

    def index(self, g: Sequence[int]) -> int:
        dims = self._shape
        if len(g) != len(dims):
            raise ValueError(f"coordinate {tuple(g)} has wrong dimension")
        idx = 0
        for x, d, stride in zip(g, dims, self._strides):
            if not 0 <= x < d:
                raise ValueError(f"coordinate {tuple(g)} out of bounds")
            idx += int(x) * stride
        return idx

    def coord(self, idx: int) -> Coord:
        if not 0 <= idx < self.passable.size:
            raise ValueError(f"index {idx} out of bounds")
        out = []
        for stride in self._strides:
            q, idx = divmod(idx, stride)
            out.append(int(q))
        return tuple(out)

    @cached_property
    def _shape(self) -> tuple[int, ...]:
        return tuple(self.passable.shape)

    @cached_property
    def _strides(self) -> tuple[int, ...]:
        strides = []
        acc = 1
        for d in reversed(self.dims):
            strides.append(acc)
            acc *= d
        return tuple(reversed(strides))

    @cached_property
    def csgraph(self) -> sparse.csr_matrix:
        """Unweighted adjacency matrix over linear indices."""
        adj = self.adjacency
        rows = np.fromiter((u for u, nbrs in enumerate(adj) for _ in nbrs), dtype=np.int64)
        cols = np.fromiter((v for nbrs in adj for v in nbrs), dtype=np.int64)
        n = self.passable.size
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    @cached_property
    def adjacency(self) -> list[tuple[int, ...]]:
        """Passable neighbors of every linear index (empty tuple for blocked cells)."""
        flat = self.passable.ravel()
        size = flat.size
        coords = np.indices(self.dims).reshape(self.ndim, size)
        out: list[list[int]] = [[] for _ in range(size)]
        for axis, (d, stride) in enumerate(zip(self.dims, self._strides)):
            for sign in (-1, 1):
                pos = coords[axis] + sign
                ok = flat & (pos >= 0) & (pos < d)
                src = np.nonzero(ok)[0]
                dst = src + sign * stride
                keep = flat[dst]
                for s, t in zip(src[keep].tolist(), dst[keep].tolist()):
                    out[s].append(t)
        return [tuple(sorted(n)) for n in out]


def neighbors(grid: GridMap, g: Sequence[int]) -> set[Coord]:
    """All in-bounds cells one step away along exactly one axis (passability not checked)."""
    if not grid.in_bounds(g):
        raise ValueError(f"{tuple(g)} is out of bounds for dims {grid.dims}")
    result = set()
    for axis, d in enumerate(grid.dims):
        for step in (-1, 1):
            x = g[axis] + step
            if 0 <= x < d:
                n = list(g)
                n[axis] = x
                result.add(tuple(n))
    return result


@dataclass(frozen=True)
class AgentTask:
    id: int
    start: Coord
    target: Coord


@dataclass(frozen=True, eq=False)
class Instance:
    map: GridMap
    tasks: tuple[AgentTask, ...] = field()

    def __post_init__(self):
        tasks = tuple(self.tasks)
        object.__setattr__(self, "tasks", tasks)
        validate_tasks(self.map, tasks)

    @property
    def k(self) -> int:
        return len(self.tasks)

    def task(self, agent: int) -> AgentTask:
        return self.tasks[agent]


def validate_tasks(grid: GridMap, tasks: Sequence[AgentTask]) -> None:
    if not tasks:
        raise ValueError("an instance needs at least one agent")
    starts: dict[Coord, int] = {}
    targets: dict[Coord, int] = {}
    for pos, task in enumerate(tasks):
        if task.id != pos:
            raise ValueError(f"agent ids must be 0..k-1 in order, got {task.id} at {pos}")
        for what, cell in (("start", task.start), ("target", task.target)):
            if not grid.is_passable(cell):
                raise ValueError(f"agent {task.id} {what} {cell} is not a passable cell")
        if task.start in starts or task.start in targets and targets[task.start] != task.id:
            raise ValueError(f"agent {task.id} start {task.start} is shared with another agent")
        if task.target in targets or task.target in starts and starts[task.target] != task.id:
            raise ValueError(f"agent {task.id} target {task.target} is shared with another agent")
        starts[task.start] = task.id
        targets[task.target] = task.id


def make_instance(grid: GridMap, pairs: Iterable[tuple[Sequence[int], Sequence[int]]]) -> Instance:
    """Build an instance from ``(start, target)`` pairs, numbering agents in order."""
    tasks = tuple(
        AgentTask(i, tuple(int(v) for v in s), tuple(int(v) for v in t))
        for i, (s, t) in enumerate(pairs)
    )
    return Instance(grid, tasks)


# --- MovingAI formats -------------------------------------------------------


def load_map(text: str) -> GridMap:
    """Parse a MovingAI ``.map`` file into a 2-D grid with ``dims == (W, H)``."""
    lines = text.splitlines()
    header: dict[str, str] = {}
    lineno = 0
    expected = ("type", "height", "width")
    while True:
        if lineno >= len(lines):
            raise MapFormatError("missing 'map' line", lineno)
        raw = lines[lineno].strip()
        lineno += 1
        if raw == "map":
            break
        parts = raw.split()
        if len(parts) != 2 or parts[0] not in expected or parts[0] in header:
            raise MapFormatError(f"unexpected header line {raw!r}", lineno)
        header[parts[0]] = parts[1]
    missing = [key for key in expected if key not in header]
    if missing:
        raise MapFormatError(f"header is missing {', '.join(missing)}", lineno)
    if header["type"] != "octile":
        raise MapFormatError(f"unsupported map type {header['type']!r}", 1)
    try:
        height, width = int(header["height"]), int(header["width"])
    except ValueError as exc:
        raise MapFormatError(f"non-integer map size ({exc})", lineno) from None
    if height < 1 or width < 1:
        raise MapFormatError("map size must be positive", lineno)

    body = lines[lineno:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != height:
        raise MapFormatError(f"expected {height} rows, found {len(body)}", lineno + len(body))
    passable = np.zeros((width, height), dtype=bool)
    for y, row in enumerate(body):
        row_no = lineno + y + 1
        row = row.rstrip("\r")
        if len(row) != width:
            raise MapFormatError(f"row has {len(row)} cells, expected {width}", row_no)
        for x, ch in enumerate(row):
            if ch in PASSABLE_CHARS:
                passable[x, y] = True
            elif ch not in UNPASSABLE_CHARS:
                raise MapFormatError(f"unknown cell character {ch!r}", row_no)
    return GridMap(passable)


def dump_map(grid: GridMap) -> str:
    """Serialize a 2-D grid in canonical ``.map`` form (``.`` and ``@`` only)."""
    if grid.ndim != 2:
        raise ValueError("only 2-D maps have a file format")
    width, height = grid.dims
    rows = ["".join("." if grid.passable[x, y] else "@" for x in range(width)) for y in range(height)]
    return f"type octile\nheight {height}\nwidth {width}\nmap\n" + "\n".join(rows) + "\n"


@dataclass(frozen=True)
class ScenarioRow:
    bucket: int
    map_name: str
    width: int
    height: int
    start: Coord
    target: Coord
    optimal_length: float


def parse_scenario(text: str, grid: GridMap | None = None) -> list[ScenarioRow]:
    """Parse every data row of a ``.scen`` file, checking coordinates when ``grid`` is given."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("version"):
        raise MapFormatError("missing 'version' header", 1)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 9:
            parts = raw.split()
        if len(parts) != 9:
            raise MapFormatError(f"expected 9 fields, found {len(parts)}", lineno)
        try:
            bucket, width, height, sx, sy, gx, gy = (int(parts[i]) for i in (0, 2, 3, 4, 5, 6, 7))
            length = float(parts[8])
        except ValueError as exc:
            raise MapFormatError(str(exc), lineno) from None
        row = ScenarioRow(bucket, parts[1], width, height, (sx, sy), (gx, gy), length)
        for what, cell in (("start", row.start), ("target", row.target)):
            if grid is not None:
                if not grid.in_bounds(cell):
                    raise ScenarioError(f"line {lineno}: {what} {cell} is outside the map")
                if not grid.is_passable(cell):
                    raise ScenarioError(f"line {lineno}: {what} {cell} is on an unpassable cell")
            elif not (0 <= cell[0] < width and 0 <= cell[1] < height):
                raise ScenarioError(f"line {lineno}: {what} {cell} is outside {width}x{height}")
        rows.append(row)
    return rows


def select_rows(rows: Iterable[ScenarioRow], count: int) -> list[AgentTask]:
    """Take rows in order, skipping any whose start or target collides with one already taken."""
    if count < 1:
        raise ScenarioError("count must be positive")
    used: set[Coord] = set()
    tasks: list[AgentTask] = []
    for row in rows:
        if row.start in used or row.target in used:
            continue
        used.add(row.start)
        used.add(row.target)
        tasks.append(AgentTask(len(tasks), row.start, row.target))
        if len(tasks) == count:
            return tasks
    raise ScenarioError(f"only {len(tasks)} usable rows, {count} requested")


def load_scenario(text: str, count: int, grid: GridMap | None = None) -> list[AgentTask]:
    return select_rows(parse_scenario(text, grid), count)


# --- solvability -----------------------------------------------------------


def component_labels(grid: GridMap, blocked: Iterable[int] = ()) -> np.ndarray:
    """Flat array of connected-component labels (0 for unpassable cells)."""
    free = grid.passable.copy()
    blocked = list(blocked)
    if blocked:
        free.ravel()[blocked] = False
    structure = ndimage.generate_binary_structure(grid.ndim, 1)
    labels, _ = ndimage.label(free, structure=structure)
    return labels.ravel()


def is_instance_solvable(instance: Instance) -> bool:
    """Every agent can reach its target through passable cells, ignoring other agents."""
    labels = component_labels(instance.map)
    grid = instance.map
    return all(labels[grid.index(t.start)] == labels[grid.index(t.target)] for t in instance.tasks)


def bfs_distances(grid: GridMap, source: int, blocked: frozenset[int] | set[int] = frozenset()) -> np.ndarray:
    """Shortest step counts from ``source`` to every cell; -1 where unreachable."""
    return bfs_distance_table(grid, [source], blocked)[0]


def heuristic_tables(grid: GridMap, goals: Sequence[int], blocked: Iterable[int] = (), chunk: int = 32) -> list[array]:
    """Compact per-goal distance rows (``array('i')``) for search heuristics."""
    blocked = list(blocked)
    out = []
    for lo in range(0, len(goals), chunk):
        rows = bfs_distance_table(grid, goals[lo : lo + chunk], blocked).astype(np.int32)
        out += [array("i", row.tobytes()) for row in rows]
    return out


def bfs_distance_table(grid: GridMap, sources: Sequence[int], blocked: Iterable[int] = ()) -> np.ndarray:
    """One row of :func:`bfs_distances` per source, computed in a single call."""
    blocked = np.fromiter(blocked, dtype=np.int64)
    graph = grid.csgraph
    if blocked.size:
        # no edges into blocked cells; a blocked source then reaches nothing
        graph = graph.copy()
        graph.data[np.isin(graph.indices, blocked)] = 0
        graph.eliminate_zeros()
    sources = np.asarray(sources, dtype=np.int64)
    if sources.size == 0:
        return np.empty((0, grid.passable.size), dtype=np.int64)
    d = csgraph.shortest_path(graph, unweighted=True, indices=sources)
    out = np.where(np.isinf(d), -1, d).astype(np.int64)
    if blocked.size:
        out[np.isin(sources, blocked)] = -1
    return out
