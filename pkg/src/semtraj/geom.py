"""Workspace geometry: worlds, trajectories, resampling, semantic distance metrics.

The workspace is the unit square [0, 1]^2. Trajectories are float64 numpy
arrays of shape (N, 2); the canonical model-facing length is N = 100.
Axis convention (top-down view): left = -X, right = +X, front = -Y, back = +Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_WAYPOINTS = 100
WORKSPACE_CENTER = np.array([0.5, 0.5])

AXIS_X = 0
AXIS_Y = 1


class GenerationError(RuntimeError):
    """World rejection sampling did not find a feasible configuration."""


class AugmentationRejected(RuntimeError):
    """Rotation/rescale pushed the problem outside the workspace."""


@dataclass(frozen=True)
class SceneObject:
    """A labeled point object in the workspace."""

    label: str
    position: np.ndarray  # shape (2,)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        if not self.label:
            raise ValueError("object label must be nonempty")


@dataclass
class World:
    """A planning problem: labeled objects plus fixed start and goal."""

    objects: list[SceneObject]
    start: np.ndarray  # shape (2,)
    goal: np.ndarray  # shape (2,)
    rng_seed: int = 0

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64)
        self.goal = np.asarray(self.goal, dtype=np.float64)

    @property
    def labels(self) -> list[str]:
        return [o.label for o in self.objects]

    def positions(self) -> np.ndarray:
        """Object positions stacked as an (M, 2) array."""
        if not self.objects:
            return np.zeros((0, 2))
        return np.stack([o.position for o in self.objects])


@dataclass
class WorldGenConfig:
    """Knobs for rejection-sampled random worlds."""

    min_objects: int = 3
    max_objects: int = 6
    min_object_spacing: float = 0.12
    min_endpoint_clearance: float = 0.15
    min_start_goal_dist: float = 0.4
    object_margin: float = 0.1   # keep objects off the workspace edge
    endpoint_margin: float = 0.05
    max_attempts: int = 10_000
    labels: list[str] = field(default_factory=lambda: ["object"])

    def validate(self):
        if not (1 <= self.min_objects <= self.max_objects <= 16):
            raise ValueError("object count range must lie within [1, 16]")


def gen_random_world(seed: int, cfg: WorldGenConfig) -> World:
    """Sample a World satisfying all spacing invariants; pure in (seed, cfg).

    Raises GenerationError when rejection sampling exhausts cfg.max_attempts,
    which signals an infeasible spacing configuration.
    """
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(seed))
    n_objects = int(rng.integers(cfg.min_objects, cfg.max_objects + 1))
    lo, hi = cfg.object_margin, 1.0 - cfg.object_margin

    for _ in range(cfg.max_attempts):
        pts = rng.uniform(lo, hi, size=(n_objects, 2))
        if n_objects > 1:
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            if d[np.triu_indices(n_objects, k=1)].min() < cfg.min_object_spacing:
                continue
        elo, ehi = cfg.endpoint_margin, 1.0 - cfg.endpoint_margin
        start = rng.uniform(elo, ehi, size=2)
        goal = rng.uniform(elo, ehi, size=2)
        if np.linalg.norm(start - goal) < max(cfg.min_start_goal_dist, 1e-12):
            continue
        if n_objects:
            dc = np.linalg.norm(pts - start, axis=1).min()
            dg = np.linalg.norm(pts - goal, axis=1).min()
            if min(dc, dg) < cfg.min_endpoint_clearance:
                continue
        labels = [cfg.labels[i] for i in rng.choice(len(cfg.labels), size=n_objects,
                                                    replace=len(cfg.labels) < n_objects)]
        objects = [SceneObject(lbl, p) for lbl, p in zip(labels, pts)]
        return World(objects=objects, start=start, goal=goal, rng_seed=int(seed))

    raise GenerationError(
        f"no feasible world after {cfg.max_attempts} attempts (seed={seed}); "
        "spacing constraints are likely unsatisfiable")


def as_trajectory(points) -> np.ndarray:
    """Coerce to an (N, 2) float64 waypoint array, validating shape."""
    traj = np.asarray(points, dtype=np.float64)
    if traj.ndim != 2 or traj.shape[1] != 2:
        raise ValueError(f"trajectory must have shape (N, 2), got {traj.shape}")
    return traj


def resample(traj: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to n waypoints equally spaced along the result.

    Consecutive output waypoints sit at one common chord distance (found by
    bisection), so the output is equally spaced by its own arc length and
    resampling is a fixpoint: resampling the output again reproduces it.
    Endpoints are preserved exactly. Degenerate zero-length polylines yield
    n copies of the first waypoint.
    """
    traj = as_trajectory(traj)
    if len(traj) < 2:
        raise ValueError("trajectory must have at least 2 waypoints")
    if n < 2:
        raise ValueError(f"resample target must be >= 2, got {n}")

    seg_vec = np.diff(traj, axis=0)
    seg_len = np.linalg.norm(seg_vec, axis=1)
    total = float(seg_len.sum())
    if total <= 0.0:
        return np.repeat(traj[:1], n, axis=0)
    cum_len = np.concatenate([[0.0], np.cumsum(seg_len)])

    def walk(c: float):
        """Place n-1 chords of length c; returns (points, shortfall).

        shortfall > 0: chord too small (arc left over at the end);
        shortfall < 0: chord too large (polyline exhausted early).
        """
        pts = [traj[0]]
        si, u, q = 0, 0.0, traj[0]
        consumed = 0.0
        for k in range(n - 1):
            placed = False
            while si < len(seg_vec):
                a, d = traj[si], seg_vec[si]
                dd = float(d @ d)
                if dd > 0.0:
                    aq = a - q
                    b = float(d @ aq)
                    disc = b * b - dd * (float(aq @ aq) - c * c)
                    if disc >= 0.0:
                        sq = math.sqrt(disc)
                        r1 = (-b - sq) / dd
                        r2 = (-b + sq) / dd
                        root = None
                        if r1 > u + 1e-15 and r1 <= 1.0 + 1e-12:
                            inside = float(aq @ aq) + 2 * b * u + dd * u * u < c * c
                            use_r2 = inside and r2 <= 1.0 + 1e-12 and r2 > u + 1e-15
                            root = r2 if use_r2 else r1
                        elif r2 > u + 1e-15 and r2 <= 1.0 + 1e-12:
                            root = r2
                        if root is not None:
                            root = min(root, 1.0)
                            q = a + root * d
                            consumed = cum_len[si] + root * seg_len[si]
                            u = root
                            pts.append(q)
                            placed = True
                            break
                si += 1
                u = 0.0
            if not placed:
                return pts, -((n - 1 - k) * c + 1e-12)
        return pts, total - consumed

    # bisection on shortfall(c); c* lies in (0, total/(n-1)]
    tol = 1e-13 * max(total, 1.0)
    c = total / (n - 1)
    pts, f = walk(c)
    if not (len(pts) == n and abs(f) <= tol):
        lo, hi = 0.0, total / (n - 1) * (1.0 + 1e-9)
        best = None
        for _ in range(64):
            c = 0.5 * (lo + hi)
            pts, f = walk(c)
            if len(pts) == n and abs(f) <= tol:
                best = pts
                break
            if f > 0.0:
                lo, best = c, pts
            else:
                hi = c
        else:
            pts, _ = walk(lo)
            best = pts if len(pts) >= n else best
        pts = best if best is not None else pts

    while len(pts) < n:
        pts.append(traj[-1])
    out = np.stack(pts[:n])
    out[0] = traj[0]
    out[-1] = traj[-1]
    return out


def min_dist(traj: np.ndarray, p) -> float:
    """Minimum Euclidean distance from any waypoint to point p."""
    traj = as_trajectory(traj)
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    return float(np.linalg.norm(traj - np.asarray(p, dtype=np.float64), axis=1).min())


def closest_waypoint_index(traj: np.ndarray, p) -> int:
    """Index of the waypoint of closest approach to p; ties -> lowest index."""
    traj = as_trajectory(traj)
    d = np.linalg.norm(traj - np.asarray(p, dtype=np.float64), axis=1)
    return int(np.argmin(d))  # argmin returns the first minimum


def signed_axis_offset(traj: np.ndarray, obj: SceneObject, axis: int) -> float:
    """Signed coordinate difference, along axis, between the waypoint of
    closest approach to obj and obj.position."""
    if axis not in (AXIS_X, AXIS_Y):
        raise ValueError(f"axis must be {AXIS_X} (X) or {AXIS_Y} (Y)")
    i = closest_waypoint_index(traj, obj.position)
    return float(traj[i, axis] - obj.position[axis])


def _transform_points(pts: np.ndarray, rotation: float, scale: float) -> np.ndarray:
    c, s = math.cos(rotation), math.sin(rotation)
    rot = np.array([[c, -s], [s, c]])
    centered = np.atleast_2d(pts) - WORKSPACE_CENTER
    out = (centered @ rot.T) * scale + WORKSPACE_CENTER
    return out.reshape(np.shape(pts))


def transform(world: World, traj: np.ndarray, rotation: float, scale: float):
    """Rotate about the workspace center then scale about it, applied jointly
    to objects, start, goal, and every waypoint. Labels are unchanged.

    Raises AugmentationRejected when any transformed point leaves [0, 1]^2;
    the caller re-samples (rotation, scale).
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    traj = as_trajectory(traj)

    new_traj = _transform_points(traj, rotation, scale)
    new_start = _transform_points(world.start, rotation, scale)
    new_goal = _transform_points(world.goal, rotation, scale)
    new_pos = [_transform_points(o.position, rotation, scale) for o in world.objects]

    stacked = [new_traj, new_start.reshape(1, 2), new_goal.reshape(1, 2)]
    if new_pos:
        stacked.append(np.stack(new_pos))
    allpts = np.concatenate(stacked)
    if allpts.min() < 0.0 or allpts.max() > 1.0:
        raise AugmentationRejected(
            f"transform(rotation={rotation:.4f}, scale={scale:.4f}) leaves the workspace")

    new_objects = [SceneObject(o.label, p) for o, p in zip(world.objects, new_pos)]
    new_world = World(objects=new_objects, start=new_start, goal=new_goal,
                      rng_seed=world.rng_seed)
    return new_world, new_traj


def check_world_invariants(world: World, cfg: WorldGenConfig):
    """Raise AssertionError if any World invariant is violated."""
    m = len(world.objects)
    assert cfg.min_objects <= m <= cfg.max_objects, f"object count {m} out of range"
    pts = world.positions()
    for p in [world.start, world.goal, *pts]:
        assert np.all((p >= 0.0) & (p <= 1.0)), f"point {p} outside workspace"
    for i in range(m):
        for j in range(i + 1, m):
            d = np.linalg.norm(pts[i] - pts[j])
            assert d >= cfg.min_object_spacing, f"objects {i},{j} too close ({d:.4f})"
    for p in pts:
        assert np.linalg.norm(p - world.start) >= cfg.min_endpoint_clearance
        assert np.linalg.norm(p - world.goal) >= cfg.min_endpoint_clearance
    assert np.linalg.norm(world.start - world.goal) > 0.0, "start == goal"
