"""Maze generation and optimal-path checking on rectangular grids.

Grids are carved as a randomized spanning tree over an odd-coordinate lattice
plus a sprinkle of extra openings (so multiple optimal routes can exist),
then a start/goal pair is placed with a minimum BFS distance. A prediction
counts as correct if it is any shortest path, not just the generator's.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..errors import ConfigError, FormatError, GenerationError
from ..tensor.rng import Rng

WALL, OPEN, START, GOAL = 0, 1, 2, 3
TAG_CHARS = "#.SG"

GENERATION_RETRIES = 64
PLACEMENT_TRIES = 64
EXTRA_OPENING_RATE = 0.04


@dataclass(frozen=True)
class MazeGrid:
    height: int
    width: int
    cells: tuple  # row-major tags

    def __post_init__(self):
        if len(self.cells) != self.height * self.width:
            raise FormatError(
                f"maze needs {self.height * self.width} cells, got {len(self.cells)}"
            )
        for tag in self.cells:
            if not WALL <= tag <= GOAL:
                raise FormatError(f"maze cell tag {tag} outside 0..3")
        if self.cells.count(START) != 1 or self.cells.count(GOAL) != 1:
            raise FormatError("maze needs exactly one start and one goal")

    @property
    def start(self) -> int:
        return self.cells.index(START)

    @property
    def goal(self) -> int:
        return self.cells.index(GOAL)

    def is_open(self, idx: int) -> bool:
        return self.cells[idx] != WALL

    def __str__(self):
        return "".join(TAG_CHARS[t] for t in self.cells)


def _neighbors(idx: int, height: int, width: int):
    r, c = divmod(idx, width)
    if r > 0:
        yield idx - width
    if r + 1 < height:
        yield idx + width
    if c > 0:
        yield idx - 1
    if c + 1 < width:
        yield idx + 1


def bfs_parents(open_cells, height: int, width: int, src: int):
    """Distances (edges) and BFS parents from src over open cells; -1 = unreachable."""
    dist = [-1] * (height * width)
    parent = [-1] * (height * width)
    dist[src] = 0
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        for nxt in _neighbors(cur, height, width):
            if open_cells[nxt] and dist[nxt] < 0:
                dist[nxt] = dist[cur] + 1
                parent[nxt] = cur
                queue.append(nxt)
    return dist, parent


def shortest_path_cells(grid: MazeGrid):
    """One BFS-shortest path from start to goal as an ordered index tuple."""
    open_cells = [grid.is_open(i) for i in range(len(grid.cells))]
    dist, parent = bfs_parents(open_cells, grid.height, grid.width, grid.start)
    if dist[grid.goal] < 0:
        return None
    path = [grid.goal]
    while path[-1] != grid.start:
        path.append(parent[path[-1]])
    path.reverse()
    return tuple(path)


def maze_generate(rng: Rng, height: int, width: int, min_path_len: int):
    """Carve a maze and place start/goal at BFS distance >= min_path_len.

    Returns (grid, path) where path is one shortest route including both
    endpoints. Raises after a bounded number of rebuilds.
    """
    if height < 5 or width < 5:
        raise ConfigError(f"maze dimensions must be at least 5x5, got {height}x{width}")
    for _ in range(GENERATION_RETRIES):
        open_cells = _carve(rng, height, width)
        placement = _place_endpoints(rng, open_cells, height, width, min_path_len)
        if placement is None:
            continue
        start, goal, path = placement
        tags = [OPEN if open_cells[i] else WALL for i in range(height * width)]
        tags[start] = START
        tags[goal] = GOAL
        return MazeGrid(height, width, tuple(tags)), path
    raise GenerationError(
        f"no {height}x{width} maze with path length >= {min_path_len} "
        f"after {GENERATION_RETRIES} tries"
    )


def _carve(rng: Rng, height: int, width: int):
    """Recursive-backtracker spanning tree on the odd lattice + extra openings."""
    open_cells = [False] * (height * width)
    nodes_h = (height - 1) // 2
    nodes_w = (width - 1) // 2

    def cell(nr, nc):
        return (2 * nr + 1) * width + (2 * nc + 1)

    visited = [[False] * nodes_w for _ in range(nodes_h)]
    start_nr = int(rng.integers(0, nodes_h))
    start_nc = int(rng.integers(0, nodes_w))
    stack = [(start_nr, start_nc)]
    visited[start_nr][start_nc] = True
    open_cells[cell(start_nr, start_nc)] = True
    while stack:
        nr, nc = stack[-1]
        options = []
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ar, ac = nr + dr, nc + dc
            if 0 <= ar < nodes_h and 0 <= ac < nodes_w and not visited[ar][ac]:
                options.append((ar, ac))
        if not options:
            stack.pop()
            continue
        ar, ac = options[int(rng.integers(0, len(options)))]
        visited[ar][ac] = True
        open_cells[cell(ar, ac)] = True
        wall = (cell(nr, nc) + cell(ar, ac)) // 2
        open_cells[wall] = True
        stack.append((ar, ac))

    walls = [i for i, o in enumerate(open_cells) if not o]
    extra = int(EXTRA_OPENING_RATE * height * width)
    if extra and walls:
        for i in rng.choice(len(walls), size=min(extra, len(walls)), replace=False):
            open_cells[walls[int(i)]] = True
    return open_cells


def _place_endpoints(rng: Rng, open_cells, height: int, width: int, min_path_len: int):
    open_idx = [i for i, o in enumerate(open_cells) if o]
    if len(open_idx) < 2:
        return None
    for _ in range(PLACEMENT_TRIES):
        start = open_idx[int(rng.integers(0, len(open_idx)))]
        dist, parent = bfs_parents(open_cells, height, width, start)
        far = [i for i in open_idx if dist[i] >= min_path_len]
        if not far:
            continue
        goal = far[int(rng.integers(0, len(far)))]
        path = [goal]
        while path[-1] != start:
            path.append(parent[path[-1]])
        path.reverse()
        return start, goal, tuple(path)
    return None


def maze_check(grid: MazeGrid, predicted_path_cells) -> bool:
    """True iff the predicted cells are a connected simple shortest path
    from start to goal over open cells."""
    cells = set(int(i) for i in predicted_path_cells)
    n = grid.height * grid.width
    if any(i < 0 or i >= n or not grid.is_open(i) for i in cells):
        return False
    if grid.start not in cells or grid.goal not in cells:
        return False
    open_cells = [grid.is_open(i) for i in range(n)]
    dist, _ = bfs_parents(open_cells, grid.height, grid.width, grid.start)
    optimal = dist[grid.goal]
    if optimal < 0 or len(cells) != optimal + 1:
        return False
    # Walk the path: every interior cell has exactly two in-set neighbors.
    prev, cur = -1, grid.start
    for _ in range(optimal):
        nxt = [i for i in _neighbors(cur, grid.height, grid.width) if i in cells and i != prev]
        if len(nxt) != 1:
            return False
        prev, cur = cur, nxt[0]
    return cur == grid.goal
