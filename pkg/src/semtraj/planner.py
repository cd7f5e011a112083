"""Grid A* planner for the collision-avoiding initial trajectory.

Worlds are rasterized onto a square occupancy grid; the path is searched with
8-connected A* (edge costs 1 and sqrt(2), octile heuristic) and returned as
cell-center waypoints with the exact start/goal substituted at the ends, then
resampled to the canonical waypoint count.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geom import N_WAYPOINTS, World, resample

SQRT2 = math.sqrt(2.0)

# 4-neighbors first so straight moves expand before diagonals on equal cost.
_MOVES = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]


class InfeasibleWorldError(RuntimeError):
    """Start or goal cell is blocked; the world must be re-sampled."""


class PlanningError(RuntimeError):
    """No path exists between start and goal on the occupancy grid."""


@dataclass
class OccupancyGrid:
    """Square boolean occupancy grid over the unit workspace."""

    resolution: int
    blocked: np.ndarray  # (resolution, resolution) bool, indexed [ix, iy]

    def cell_of(self, p) -> tuple[int, int]:
        ix = min(int(p[0] * self.resolution), self.resolution - 1)
        iy = min(int(p[1] * self.resolution), self.resolution - 1)
        return max(ix, 0), max(iy, 0)

    def center_of(self, cell: tuple[int, int]) -> np.ndarray:
        return (np.array(cell, dtype=np.float64) + 0.5) / self.resolution


def rasterize(world: World, resolution: int = 64, obstacle_radius: float = 0.05) -> OccupancyGrid:
    """Block every cell whose center lies within obstacle_radius of an object.

    Raises InfeasibleWorldError when the start or goal cell ends up blocked.
    """
    if resolution < 8:
        raise ValueError(f"resolution must be >= 8, got {resolution}")
    if obstacle_radius < 0:
        raise ValueError("obstacle_radius must be >= 0")

    blocked = np.zeros((resolution, resolution), dtype=bool)
    pts = world.positions()
    if len(pts):
        centers = (np.arange(resolution) + 0.5) / resolution
        cx, cy = np.meshgrid(centers, centers, indexing="ij")
        grid_pts = np.stack([cx, cy], axis=-1)  # (R, R, 2)
        for p in pts:
            d2 = np.sum((grid_pts - p) ** 2, axis=-1)
            blocked |= d2 <= obstacle_radius ** 2

    grid = OccupancyGrid(resolution=resolution, blocked=blocked)
    for name, p in (("start", world.start), ("goal", world.goal)):
        if grid.blocked[grid.cell_of(p)]:
            raise InfeasibleWorldError(f"{name} cell is blocked at resolution {resolution}")
    return grid


def octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    """Admissible octile-distance heuristic for 8-connected grids."""
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return (dx + dy) + (SQRT2 - 2.0) * min(dx, dy)


def _neighbors(grid: OccupancyGrid, cell: tuple[int, int]):
    r = grid.resolution
    x, y = cell
    for dx, dy in _MOVES:
        nx, ny = x + dx, y + dy
        if not (0 <= nx < r and 0 <= ny < r) or grid.blocked[nx, ny]:
            continue
        if dx and dy:
            # no corner cutting through diagonally adjacent blocked cells
            if grid.blocked[x + dx, y] or grid.blocked[x, y + dy]:
                continue
            yield (nx, ny), SQRT2
        else:
            yield (nx, ny), 1.0


def astar_cells(grid: OccupancyGrid, start_cell: tuple[int, int],
                goal_cell: tuple[int, int]) -> tuple[list[tuple[int, int]], float]:
    """Cost-optimal 8-connected cell path with deterministic tie-breaking
    (lower heuristic first, then lower cell index)."""
    r = grid.resolution
    if grid.blocked[start_cell] or grid.blocked[goal_cell]:
        raise InfeasibleWorldError("start or goal cell is blocked")

    def idx(c):
        return c[0] * r + c[1]

    g = {start_cell: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    h0 = octile(start_cell, goal_cell)
    open_heap = [(h0, h0, idx(start_cell), start_cell)]
    closed = set()

    while open_heap:
        _, _, _, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        if cur == goal_cell:
            path = [cur]
            while cur in came:
                cur = came[cur]
                path.append(cur)
            path.reverse()
            return path, path_cost(path)
        closed.add(cur)
        for nxt, step in _neighbors(grid, cur):
            cand = g[cur] + step
            if cand < g.get(nxt, math.inf) - 1e-12:
                g[nxt] = cand
                came[nxt] = cur
                h = octile(nxt, goal_cell)
                heapq.heappush(open_heap, (cand + h, h, idx(nxt), nxt))

    raise PlanningError("goal unreachable from start")


def path_cost(cells: list[tuple[int, int]]) -> float:
    """Cost of a cell path from its integer step counts (order-independent,
    so equal-cost paths compare exactly equal in floating point)."""
    straight = diag = 0
    for a, b in zip(cells, cells[1:]):
        if a[0] != b[0] and a[1] != b[1]:
            diag += 1
        else:
            straight += 1
    return straight + diag * SQRT2


def plan_astar(grid: OccupancyGrid, start, goal, n_waypoints: int = N_WAYPOINTS) -> np.ndarray:
    """Plan start -> goal and return an (n_waypoints, 2) trajectory.

    The cell path is converted to cell centers, the exact start/goal replace
    the first/last centers, and the polyline is arc-length resampled.
    """
    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    cells, _ = astar_cells(grid, grid.cell_of(start), grid.cell_of(goal))
    pts = [grid.center_of(c) for c in cells]
    pts[0] = start
    pts[-1] = goal
    if len(pts) == 1:
        pts = [start, goal]
    return resample(np.stack(pts), n_waypoints)


def plan_initial_trajectory(world: World, resolution: int = 64,
                            obstacle_radius: float = 0.05,
                            n_waypoints: int = N_WAYPOINTS) -> np.ndarray:
    """Rasterize a world and plan its initial trajectory in one call."""
    grid = rasterize(world, resolution, obstacle_radius)
    return plan_astar(grid, world.start, world.goal, n_waypoints)
