"""Ground-truth trajectory reshaping by covariant gradient descent.

The objective combines a smoothness term, an attachment term pulling the
trajectory toward the original, and one semantic term selected by the parsed
command (attract/repel/directional hinge). Descent is preconditioned by the
inverse of the second-difference precision matrix over interior waypoints, so
updates propagate smoothly along the trajectory; endpoints stay fixed and
every iterate is clamped to the unit workspace.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .geom import AXIS_X, AXIS_Y, World, as_trajectory, closest_waypoint_index, min_dist
from .language import CommandAst, Direction, Intensity


class DivergenceError(RuntimeError):
    """Objective became non-finite during descent (bad configuration)."""


class CostMode(enum.Enum):
    ATTRACT = "attract"
    REPEL = "repel"
    DIR_X_POS = "dir_x_pos"
    DIR_X_NEG = "dir_x_neg"
    DIR_Y_POS = "dir_y_pos"
    DIR_Y_NEG = "dir_y_neg"


# (axis, sign) of the commanded direction for the directional modes
_DIRECTIONAL = {
    CostMode.DIR_X_POS: (AXIS_X, +1.0),
    CostMode.DIR_X_NEG: (AXIS_X, -1.0),
    CostMode.DIR_Y_POS: (AXIS_Y, +1.0),
    CostMode.DIR_Y_NEG: (AXIS_Y, -1.0),
}

_DIRECTION_TO_MODE = {
    Direction.CLOSER: CostMode.ATTRACT,
    Direction.FURTHER: CostMode.REPEL,
    Direction.LEFT: CostMode.DIR_X_NEG,
    Direction.RIGHT: CostMode.DIR_X_POS,
    Direction.FRONT: CostMode.DIR_Y_NEG,
    Direction.BACK: CostMode.DIR_Y_POS,
}


@dataclass(frozen=True)
class SemanticCostSpec:
    target_index: int
    mode: CostMode
    weight: float
    influence_radius: float = 0.25

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("weight must be >= 0")
        if self.target_index < 0:
            raise ValueError("target_index must be valid")


@dataclass
class ChompConfig:
    iterations: int = 450
    step_size: float = 0.004
    smoothness_weight: float = 1.0
    attachment_weight: float = 2.0
    intensity_multipliers: dict[Intensity, float] = field(default_factory=lambda: {
        Intensity.SLIGHT: 0.4,
        Intensity.NEUTRAL: 1.0,
        Intensity.STRONG: 2.0,
        Intensity.VERY_STRONG: 3.5,
    })
    base_semantic_weight: float = 4.0
    influence_radius: float = 0.25

    def validate(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step size must be > 0")
        for name in ("smoothness_weight", "attachment_weight", "base_semantic_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def command_to_cost(ast: CommandAst, cfg: ChompConfig) -> SemanticCostSpec:
    """Map a parsed command to its semantic cost: mode from the direction,
    weight = base weight x intensity multiplier."""
    return SemanticCostSpec(
        target_index=ast.target_index,
        mode=_DIRECTION_TO_MODE[ast.direction],
        weight=cfg.base_semantic_weight * cfg.intensity_multipliers[ast.intensity],
        influence_radius=cfg.influence_radius,
    )


def adapt_spec_to_scene(spec: SemanticCostSpec, xi_o: np.ndarray, world: World,
                        cfg: ChompConfig) -> SemanticCostSpec:
    """Widen the influence radius so the semantic cost is active for the given
    scene even when the original trajectory already clears the base radius.

    Repel: effective radius reaches half a base radius beyond the original
    clearance. Directional: the margin (radius / 2) reaches a quarter radius
    beyond the original signed offset. Attract needs no adaptation.
    """
    target = world.objects[spec.target_index].position
    r = spec.influence_radius
    if spec.mode is CostMode.REPEL:
        d0 = min_dist(xi_o, target)
        return replace(spec, influence_radius=max(r, d0 + 0.5 * r))
    if spec.mode in _DIRECTIONAL:
        axis, sign = _DIRECTIONAL[spec.mode]
        i = closest_waypoint_index(xi_o, target)
        s0 = sign * (xi_o[i, axis] - target[axis])
        return replace(spec, influence_radius=max(r, 2.0 * s0 + 0.5 * r))
    return spec


def _window(xi_o: np.ndarray, target: np.ndarray, radius: float) -> np.ndarray:
    """Boolean mask of waypoints near the object on the original trajectory.

    Covers every approach region: all waypoints whose original distance to
    the target is within max(radius, closest distance + radius / 2). Always
    contains the nearest-approach waypoint.
    """
    d = np.linalg.norm(xi_o - target, axis=1)
    r_win = max(radius, float(d.min()) + 0.5 * radius)
    return d <= r_win


def _semantic_value_grad(traj, xi_o, target, spec: SemanticCostSpec, cfg: ChompConfig):
    n = len(traj)
    w = spec.weight
    r = spec.influence_radius
    grad = np.zeros_like(traj)
    if w == 0.0:
        return 0.0, grad

    if spec.mode is CostMode.REPEL:
        delta = traj - target
        d = np.maximum(np.linalg.norm(delta, axis=1), 1e-9)
        hinge = np.maximum(0.0, r - d)
        value = (w / n) * float(np.sum(hinge ** 2)) / (2.0 * r)
        coef = -(w / (n * r)) * hinge / d
        grad = coef[:, None] * delta
        return value, grad

    win = _window(xi_o, target, r)
    if spec.mode is CostMode.ATTRACT:
        # pull window waypoints toward the object down to a standoff distance
        d0 = float(np.linalg.norm(xi_o - target, axis=1).min())
        standoff = min(0.5 * r, 0.5 * d0)
        delta = traj[win] - target
        d = np.maximum(np.linalg.norm(delta, axis=1), 1e-9)
        hinge = np.maximum(0.0, d - standoff)
        value = (w / n) * float(np.sum(hinge ** 2))
        grad[win] = ((2.0 * w / n) * hinge / d)[:, None] * delta
        return value, grad

    axis, sign = _DIRECTIONAL[spec.mode]
    m = 0.5 * r
    s = sign * (traj[win, axis] - target[axis])
    hinge = np.maximum(0.0, m - s)
    value = (w / n) * float(np.sum(hinge ** 2))
    grad[win, axis] = (2.0 * w / n) * hinge * (-sign)
    return value, grad


def objective(traj, xi_o, spec: SemanticCostSpec, cfg: ChompConfig,
              world: World | None = None, target=None) -> float:
    """Total cost U = smoothness + attachment + semantic term."""
    value, _ = objective_and_gradient(traj, xi_o, spec, cfg, world=world, target=target)
    return value


def objective_and_gradient(traj, xi_o, spec: SemanticCostSpec, cfg: ChompConfig,
                           world: World | None = None, target=None):
    """U and its analytic gradient with respect to every waypoint."""
    traj = as_trajectory(traj)
    xi_o = as_trajectory(xi_o)
    if traj.shape != xi_o.shape:
        raise ValueError(f"trajectory shapes differ: {traj.shape} vs {xi_o.shape}")
    if target is None:
        if world is None:
            raise ValueError("either world or target position is required")
        target = world.objects[spec.target_index].position
    target = np.asarray(target, dtype=np.float64)
    n = len(traj)

    steps = np.diff(traj, axis=0)
    smooth = 0.5 * cfg.smoothness_weight * float(np.sum(steps ** 2))
    grad = np.zeros_like(traj)
    grad[:-1] -= cfg.smoothness_weight * steps
    grad[1:] += cfg.smoothness_weight * steps

    dev = traj - xi_o
    attach = cfg.attachment_weight * float(np.sum(dev ** 2)) / n
    grad += (2.0 * cfg.attachment_weight / n) * dev

    sem_value, sem_grad = _semantic_value_grad(traj, xi_o, target, spec, cfg)
    return smooth + attach + sem_value, grad + sem_grad


def second_difference_precision(n_interior: int) -> np.ndarray:
    """Tridiagonal (2, -1) precision matrix over the interior waypoints."""
    a = 2.0 * np.eye(n_interior)
    idx = np.arange(n_interior - 1)
    a[idx, idx + 1] = -1.0
    a[idx + 1, idx] = -1.0
    return a


_PRECISION_INV_CACHE: dict[int, np.ndarray] = {}


def _precision_inv(n_interior: int) -> np.ndarray:
    inv = _PRECISION_INV_CACHE.get(n_interior)
    if inv is None:
        inv = np.linalg.inv(second_difference_precision(n_interior))
        _PRECISION_INV_CACHE[n_interior] = inv
    return inv


def optimize(xi_o, spec: SemanticCostSpec, cfg: ChompConfig,
             world: World | None = None, target=None,
             return_history: bool = False):
    """Reshape xi_o by covariant descent: xi <- xi - eta * A^-1 grad(U) on the
    interior waypoints, endpoints fixed, iterates clamped to [0, 1]^2.

    Returns the reshaped trajectory, or (trajectory, objective history) when
    return_history is set. Raises DivergenceError on non-finite objectives.
    """
    cfg.validate()
    xi_o = as_trajectory(xi_o)
    n = len(xi_o)
    if n < 3:
        raise ValueError("trajectory too short to optimize")
    if target is None:
        if world is None:
            raise ValueError("either world or target position is required")
        target = world.objects[spec.target_index].position

    a_inv = _precision_inv(n - 2)
    traj = xi_o.copy()
    history = []
    for it in range(cfg.iterations + 1):
        value, grad = objective_and_gradient(traj, xi_o, spec, cfg, target=target)
        if not np.isfinite(value):
            raise DivergenceError(f"objective non-finite at iteration {it}")
        history.append(value)
        if it == cfg.iterations:
            break
        traj[1:-1] -= cfg.step_size * (a_inv @ grad[1:-1])
        np.clip(traj, 0.0, 1.0, out=traj)

    if return_history:
        return traj, np.array(history)
    return traj


def reshape_with_command(xi_o, ast: CommandAst, world: World,
                         cfg: ChompConfig | None = None) -> np.ndarray:
    """Oracle pipeline: command -> scene-adapted semantic cost -> optimize."""
    cfg = cfg or ChompConfig()
    spec = command_to_cost(ast, cfg)
    spec = adapt_spec_to_scene(spec, xi_o, world, cfg)
    return optimize(xi_o, spec, cfg, world=world)


def valid_targets(xi_o, world: World, edge_margin: int = 3,
                  endpoint_buffer: float = 0.1,
                  min_approach: float = 0.03) -> list[int]:
    """Objects for which a reshaping command is geometrically actionable.

    The nearest approach must be an interior waypoint (fixed endpoints cannot
    move), both endpoints must clear the object by a buffer beyond the
    closest approach (so the approach anchor cannot migrate onto an
    endpoint), and the approach must not already touch the object.
    """
    xi_o = as_trajectory(xi_o)
    n = len(xi_o)
    out = []
    for idx, obj in enumerate(world.objects):
        d = np.linalg.norm(xi_o - obj.position, axis=1)
        i = int(np.argmin(d))
        if not (edge_margin <= i <= n - 1 - edge_margin):
            continue
        if min(d[0], d[-1]) < d[i] + endpoint_buffer:
            continue
        if d[i] < min_approach:
            continue
        out.append(idx)
    return out


def valid_directions(xi_o, world: World, target: int,
                     min_axis_offset: float = 0.03,
                     min_axis_fraction: float = 0.4) -> list[Direction]:
    """Directions that are geometrically actionable for a valid target.

    Closer/further always qualify. A lateral direction qualifies only when
    the nearest approach is meaningfully displaced along that axis: a path
    crossing the commanded axis right at the object has a sign-ambiguous
    offset there, so such commands are not sampled. At least one axis always
    qualifies (the offsets cannot both be small relative to the distance).
    """
    xi_o = as_trajectory(xi_o)
    p = world.objects[target].position
    d = np.linalg.norm(xi_o - p, axis=1)
    i = int(np.argmin(d))
    d0 = float(d[i])
    out = [Direction.CLOSER, Direction.FURTHER]
    for axis, dirs in ((AXIS_X, (Direction.LEFT, Direction.RIGHT)),
                       (AXIS_Y, (Direction.FRONT, Direction.BACK))):
        if abs(xi_o[i, axis] - p[axis]) >= max(min_axis_offset, min_axis_fraction * d0):
            out.extend(dirs)
    return out


def compliance_delta(xi_o, xi_mod, ast: CommandAst, world: World) -> float:
    """Signed progress of xi_mod over xi_o in the commanded direction.

    Positive means compliant: distance change for closer/further (sign
    flipped for closer), signed-axis-offset change for directional commands.
    """
    from .geom import SceneObject, signed_axis_offset  # local to avoid clutter

    obj: SceneObject = world.objects[ast.target_index]
    mode = _DIRECTION_TO_MODE[ast.direction]
    if mode is CostMode.REPEL:
        return min_dist(xi_mod, obj.position) - min_dist(xi_o, obj.position)
    if mode is CostMode.ATTRACT:
        return min_dist(xi_o, obj.position) - min_dist(xi_mod, obj.position)
    axis, sign = _DIRECTIONAL[mode]
    before = signed_axis_offset(xi_o, obj, axis)
    after = signed_axis_offset(xi_mod, obj, axis)
    return sign * (after - before)
