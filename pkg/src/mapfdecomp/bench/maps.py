"""Seeded generators for benchmark-style maps and scenarios.

These produce stand-ins shaped like the common MovingAI families (empty,
random obstacles, mazes, rooms, city blocks) when the original files are not
at hand.  All generators are deterministic for a given seed.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse.csgraph import shortest_path

from ..grid import GridMap, component_labels


def empty_map(width: int, height: int) -> GridMap:
    return GridMap(np.ones((width, height), dtype=bool))


def random_map(width: int, height: int, percent: float, seed: int = 0) -> GridMap:
    """Exactly ``round(percent% * cells)`` obstacles at random positions."""
    rng = np.random.default_rng(seed)
    cells = width * height
    free = np.ones(cells, dtype=bool)
    free[rng.choice(cells, size=round(cells * percent / 100), replace=False)] = False
    return GridMap(free.reshape(width, height))


def maze_map(width: int, height: int, corridor: int, seed: int = 0) -> GridMap:
    """Depth-first maze with ``corridor``-wide passages and one-cell walls."""
    rng = np.random.default_rng(seed)
    unit = corridor + 1
    nx, ny = (width + 1) // unit, (height + 1) // unit
    free = np.zeros((width, height), dtype=bool)

    def carve(x0: int, y0: int, x1: int, y1: int) -> None:
        free[x0:min(x1, width), y0:min(y1, height)] = True

    for i in range(nx):
        for j in range(ny):
            carve(i * unit, j * unit, i * unit + corridor, j * unit + corridor)
    seen = np.zeros((nx, ny), dtype=bool)
    stack = [(0, 0)]
    seen[0, 0] = True
    while stack:
        i, j = stack[-1]
        options = [
            (i + di, j + dj)
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
            if 0 <= i + di < nx and 0 <= j + dj < ny and not seen[i + di, j + dj]
        ]
        if not options:
            stack.pop()
            continue
        ni, nj = options[rng.integers(len(options))]
        seen[ni, nj] = True
        # knock out the wall between the two cells
        x0, y0 = min(i, ni) * unit, min(j, nj) * unit
        if ni != i:
            carve(x0 + corridor, y0, x0 + unit, y0 + corridor)
        else:
            carve(x0, y0 + corridor, x0 + corridor, y0 + unit)
        stack.append((ni, nj))
    return GridMap(free)


def room_map(width: int, height: int, room: int, extra_doors: float = 0.3, seed: int = 0) -> GridMap:
    """Square rooms of side ``room - 1`` joined by single-cell doors.

    Doors form a random spanning tree over the rooms, plus a fraction
    ``extra_doors`` of the remaining walls opened to create loops.
    """
    rng = np.random.default_rng(seed)
    free = np.ones((width, height), dtype=bool)
    free[room - 1 :: room, :] = False
    free[:, room - 1 :: room] = False
    nx, ny = -(-width // room), -(-height // room)

    walls = []
    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx:
                walls.append(((i, j), (i + 1, j)))
            if j + 1 < ny:
                walls.append(((i, j), (i, j + 1)))
    order = rng.permutation(len(walls))
    parent = {(i, j): (i, j) for i in range(nx) for j in range(ny)}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for w in order:
        a, b = walls[w]
        ra, rb = find(a), find(b)
        if ra != rb or rng.random() < extra_doors:
            parent[ra] = rb
            (i, j), (ni, _) = a, b
            offset = int(rng.integers(room - 1))
            if ni != i:
                x, y = i * room + room - 1, j * room + offset
            else:
                x, y = i * room + offset, j * room + room - 1
            if x < width and y < height:
                free[x, y] = True
    return GridMap(free)


def city_map(width: int, height: int, seed: int = 0) -> GridMap:
    """Street grid with irregular building blocks; only the largest street network is kept."""
    rng = np.random.default_rng(seed)
    free = np.ones((width, height), dtype=bool)
    x = 0
    while x < width:
        bw = int(rng.integers(4, 16))
        y = 0
        while y < height:
            bh = int(rng.integers(4, 16))
            street = int(rng.integers(2, 7))
            x1, y1 = min(x + bw, width), min(y + bh, height)
            block = rng.random((x1 - x, y1 - y)) < 0.95
            # courtyards and alleys
            if rng.random() < 0.5:
                cx, cy = (x1 - x) // 2, (y1 - y) // 2
                block[max(cx - 2, 0) : cx + 2, :] = rng.random() < 0.5
                block[:, max(cy - 1, 0) : cy + 1] &= rng.random() < 0.5
            free[x:x1, y:y1] &= ~block
            y = y1 + street
        x += bw + int(rng.integers(2, 7))
    grid = GridMap(free)
    labels = component_labels(grid)
    counts = np.bincount(labels)
    counts[0] = 0
    keep = labels == int(np.argmax(counts))
    return GridMap(keep.reshape(grid.dims))


def generate_scenario(grid: GridMap, map_name: str, rows: int = 1000, seed: int = 0) -> str:
    """A ``.scen`` file of random start/target pairs inside the largest connected region.

    Starts are pairwise distinct and so are targets; a start may coincide
    with another row's target, as in the published random scenarios.  Pairs
    that draw the same cell twice are dropped, so up to ``rows`` rows result.
    """
    rng = np.random.default_rng(seed)
    labels = component_labels(grid)
    counts = np.bincount(labels)
    counts[0] = 0
    region = np.nonzero(labels == int(np.argmax(counts)))[0]
    rows = min(rows, len(region))
    starts = rng.permutation(region)[:rows]
    targets = rng.permutation(region)[:rows]
    keep = starts != targets
    starts, targets = starts[keep], targets[keep]
    dists = _pair_distances(grid, starts, targets)
    width, height = grid.dims
    lines = ["version 1"]
    for s, t, dist in zip(starts.tolist(), targets.tolist(), dists):
        (sx, sy), (tx, ty) = grid.coord(s), grid.coord(t)
        lines.append(f"{dist // 4}\t{map_name}\t{width}\t{height}\t{sx}\t{sy}\t{tx}\t{ty}\t{dist:.8f}")
    return "\n".join(lines) + "\n"


def _pair_distances(grid: GridMap, sources: np.ndarray, targets: np.ndarray, chunk: int = 64) -> list[int]:
    graph = grid.csgraph
    out: list[int] = []
    for lo in range(0, len(sources), chunk):
        d = shortest_path(graph, unweighted=True, indices=sources[lo : lo + chunk])
        out += [int(d[i, t]) for i, t in enumerate(targets[lo : lo + chunk])]
    return out


SUITE = {
    "empty-16-16": lambda: empty_map(16, 16),
    "maze-32-32-2": lambda: maze_map(32, 32, 2, seed=2),
    "random-32-32-20": lambda: random_map(32, 32, 20, seed=20),
    "room-32-32-4": lambda: room_map(32, 32, 4, seed=4),
    "city-256-256": lambda: city_map(256, 256, seed=256),
}
