"""Deterministic generation, serialization, and splitting of training samples.

A sample pairs a random world and its planned trajectory with one templated
command and the oracle-reshaped result. Sampling is rejection-based: worlds
with no actionable target, planning failures, and reshapes that fail the
semantic-compliance check advance to the next deterministic attempt, so a
sample is a pure function of its seed. Files are line-oriented JSON with a
fixed key order and shortest round-trip floats, making regeneration
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import chomp
from .chomp import ChompConfig, adapt_spec_to_scene, command_to_cost, compliance_delta
from .geom import GenerationError, N_WAYPOINTS, SceneObject, World, WorldGenConfig, \
    gen_random_world
from .language import CommandAst, Direction, Intensity, Lexicon, default_lexicon, \
    generate_command, parse_command
from .planner import InfeasibleWorldError, PlanningError, plan_initial_trajectory

log = logging.getLogger(__name__)

FORMAT_NAME = "semtraj-dataset"
FORMAT_VERSION = 1


class DatasetError(ValueError):
    pass


@dataclass
class Sample:
    world: World
    xi_o: np.ndarray
    command_text: str
    command_ast: CommandAst
    xi_mod: np.ndarray
    seed: int


@dataclass
class PipelineConfig:
    lexicon: Lexicon = field(default_factory=default_lexicon)
    world: WorldGenConfig | None = None
    chomp: ChompConfig = field(default_factory=ChompConfig)
    grid_resolution: int = 64
    obstacle_radius: float = 0.05
    compliance_threshold: float = 1e-3
    max_attempts_per_seed: int = 200
    pinned_start: tuple[float, float] | None = None
    pinned_goal: tuple[float, float] | None = None

    def __post_init__(self):
        if self.world is None:
            self.world = WorldGenConfig(labels=self.lexicon.labels)

    def pinned(self, start=(0.05, 0.05), goal=(0.95, 0.95)) -> "PipelineConfig":
        return PipelineConfig(lexicon=self.lexicon, world=self.world, chomp=self.chomp,
                              grid_resolution=self.grid_resolution,
                              obstacle_radius=self.obstacle_radius,
                              compliance_threshold=self.compliance_threshold,
                              max_attempts_per_seed=self.max_attempts_per_seed,
                              pinned_start=start, pinned_goal=goal)


def _endpoint_clearance_ok(world: World, cfg: WorldGenConfig) -> bool:
    pts = world.positions()
    if not len(pts):
        return True
    return bool(
        np.linalg.norm(pts - world.start, axis=1).min() >= cfg.min_endpoint_clearance
        and np.linalg.norm(pts - world.goal, axis=1).min() >= cfg.min_endpoint_clearance)


def generate_sample(seed: int, cfg: PipelineConfig | None = None) -> Sample:
    """Deterministically derive a compliant sample for this seed.

    Infeasible worlds, planning failures, and non-compliant reshapes advance
    an internal attempt counter (logged); the emitted sample always passes
    its own compliance check.
    """
    cfg = cfg or PipelineConfig()
    for attempt in range(cfg.max_attempts_per_seed):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, attempt])))
        world_seed = int(rng.integers(0, 2 ** 62))
        try:
            world = gen_random_world(world_seed, cfg.world)
            if cfg.pinned_start is not None:
                world = World(objects=world.objects,
                              start=np.array(cfg.pinned_start, dtype=np.float64),
                              goal=np.array(cfg.pinned_goal, dtype=np.float64),
                              rng_seed=world.rng_seed)
                if not _endpoint_clearance_ok(world, cfg.world):
                    continue
            xi_o = plan_initial_trajectory(world, cfg.grid_resolution,
                                           cfg.obstacle_radius, N_WAYPOINTS)
        except (GenerationError, InfeasibleWorldError, PlanningError) as e:
            log.debug("seed %d attempt %d: %s", seed, attempt, e)
            continue

        pool = [(d, t) for t in chomp.valid_targets(xi_o, world)
                for d in chomp.valid_directions(xi_o, world, t)]
        if not pool:
            log.debug("seed %d attempt %d: no actionable target", seed, attempt)
            continue
        direction, target = pool[int(rng.integers(0, len(pool)))]
        intensity = list(Intensity)[int(rng.integers(0, len(Intensity)))]
        ast = CommandAst(direction, intensity, target)
        text = generate_command(ast, cfg.lexicon, seed=int(rng.integers(0, 2 ** 31)),
                                split="train", label=world.objects[target].label)

        spec = adapt_spec_to_scene(command_to_cost(ast, cfg.chomp), xi_o, world, cfg.chomp)
        try:
            xi_mod = chomp.optimize(xi_o, spec, cfg.chomp, world=world)
        except chomp.DivergenceError as e:
            log.warning("seed %d attempt %d: %s", seed, attempt, e)
            continue
        delta = compliance_delta(xi_o, xi_mod, ast, world)
        if delta <= cfg.compliance_threshold:
            log.info("seed %d attempt %d rejected: compliance delta %.5f", seed, attempt, delta)
            continue
        return Sample(world=world, xi_o=xi_o, command_text=text, command_ast=ast,
                      xi_mod=xi_mod, seed=seed)
    raise GenerationError(f"no compliant sample after {cfg.max_attempts_per_seed} "
                          f"attempts for seed {seed}")


# ----------------------------- serialization -----------------------------


def _point(p) -> list[float]:
    return [float(p[0]), float(p[1])]


def _traj(t: np.ndarray) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in t]


def sample_to_json(s: Sample) -> str:
    doc = {
        "seed": int(s.seed),
        "world": {
            "start": _point(s.world.start),
            "goal": _point(s.world.goal),
            "objects": [{"label": o.label, "pos": _point(o.position)}
                        for o in s.world.objects],
        },
        "xi_o": _traj(s.xi_o),
        "command": s.command_text,
        "ast": {
            "direction": s.command_ast.direction.value,
            "intensity": s.command_ast.intensity.value,
            "target": int(s.command_ast.target_index),
        },
        "xi_mod": _traj(s.xi_mod),
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def sample_from_json(line: str, lineno: int = 0) -> Sample:
    try:
        doc = json.loads(line)
        world = World(
            objects=[SceneObject(o["label"], np.array(o["pos"], dtype=np.float64))
                     for o in doc["world"]["objects"]],
            start=np.array(doc["world"]["start"], dtype=np.float64),
            goal=np.array(doc["world"]["goal"], dtype=np.float64),
            rng_seed=int(doc["seed"]),
        )
        ast = CommandAst(Direction(doc["ast"]["direction"]),
                         Intensity(doc["ast"]["intensity"]),
                         int(doc["ast"]["target"]))
        return Sample(world=world,
                      xi_o=np.array(doc["xi_o"], dtype=np.float64),
                      command_text=doc["command"],
                      command_ast=ast,
                      xi_mod=np.array(doc["xi_mod"], dtype=np.float64),
                      seed=int(doc["seed"]))
    except (KeyError, ValueError, TypeError) as e:
        raise DatasetError(f"malformed record at line {lineno}: {e}") from e


def header_line(n_waypoints: int = N_WAYPOINTS) -> str:
    return json.dumps({"format": FORMAT_NAME, "version": FORMAT_VERSION,
                       "n_waypoints": n_waypoints}, separators=(",", ":"))


def check_sample_invariants(s: Sample, lexicon: Lexicon):
    """Raise DatasetError when a record violates the sample contract."""
    if s.xi_o.shape != (N_WAYPOINTS, 2) or s.xi_mod.shape != (N_WAYPOINTS, 2):
        raise DatasetError(f"seed {s.seed}: trajectories must be {N_WAYPOINTS}x2")
    if not (np.array_equal(s.xi_o[0], s.xi_mod[0])
            and np.array_equal(s.xi_o[-1], s.xi_mod[-1])):
        raise DatasetError(f"seed {s.seed}: endpoints differ between xi_o and xi_mod")
    if not 0 <= s.command_ast.target_index < len(s.world.objects):
        raise DatasetError(f"seed {s.seed}: target index out of range")
    parsed = parse_command(s.command_text, lexicon, s.world.labels)
    if parsed != s.command_ast:
        raise DatasetError(f"seed {s.seed}: command text does not parse back to its ast "
                           f"({parsed} != {s.command_ast})")
    for arr in (s.xi_o, s.xi_mod):
        if not np.isfinite(arr).all():
            raise DatasetError(f"seed {s.seed}: non-finite coordinates")


def generate_dataset(n: int, base_seed: int, path, cfg: PipelineConfig | None = None,
                     workers: int = 1) -> None:
    """Write n samples with seeds base_seed..base_seed+n-1; byte-deterministic
    for fixed (n, base_seed, cfg) regardless of worker count."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cfg = cfg or PipelineConfig()
    seeds = [base_seed + i for i in range(n)]
    if workers > 1:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(workers, initializer=_pool_init,
                                          initargs=(cfg,)) as pool:
            lines = pool.map(_pool_sample_line, seeds, chunksize=16)
    else:
        lines = [sample_to_json(generate_sample(s, cfg)) for s in seeds]
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(header_line() + "\n")
            for line in lines:
                f.write(line + "\n")
    except OSError as e:
        raise DatasetError(f"cannot write dataset to {path}: {e}") from e


_POOL_CFG: PipelineConfig | None = None


def _pool_init(cfg):
    global _POOL_CFG
    _POOL_CFG = cfg


def _pool_sample_line(seed: int) -> str:
    return sample_to_json(generate_sample(seed, _POOL_CFG))


def load_dataset(path, lexicon: Lexicon | None = None, validate: bool = True) -> list[Sample]:
    lexicon = lexicon or default_lexicon()
    samples: list[Sample] = []
    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline()
            try:
                meta = json.loads(header)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:1: bad header: {e}") from e
            if meta.get("format") != FORMAT_NAME:
                raise DatasetError(f"{path}: not a {FORMAT_NAME} file")
            for lineno, line in enumerate(f, start=2):
                line = line.strip()
                if not line:
                    continue
                s = sample_from_json(line, lineno)
                if validate:
                    check_sample_invariants(s, lexicon)
                samples.append(s)
    except OSError as e:
        raise DatasetError(f"cannot read dataset {path}: {e}") from e
    return samples


def seed_fraction(seed: int) -> float:
    """Deterministic platform-stable hash of a seed to [0, 1)."""
    digest = hashlib.sha256(str(int(seed)).encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") / 2 ** 64


def split_assign(seed: int, fractions) -> int:
    u = seed_fraction(seed)
    acc = 0.0
    for i, fr in enumerate(fractions):
        acc += fr
        if u < acc:
            return i
    return len(fractions) - 1


def split(path, fractions=(0.8, 0.1, 0.1), out_paths=None):
    """Partition a dataset file by sample-seed hash into train/val/test files."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    if out_paths is None:
        base = str(path)
        stem = base[:-len(".jsonl")] if base.endswith(".jsonl") else base
        out_paths = [f"{stem}.{name}.jsonl" for name in ("train", "val", "test")]
    if len(out_paths) != len(fractions):
        raise ValueError("one output path per fraction is required")

    buckets: list[list[str]] = [[] for _ in fractions]
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        meta = json.loads(header)
        if meta.get("format") != FORMAT_NAME:
            raise DatasetError(f"{path}: not a {FORMAT_NAME} file")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                seed = json.loads(line)["seed"]
            except (json.JSONDecodeError, KeyError) as e:
                raise DatasetError(f"{path}:{lineno}: malformed record: {e}") from e
            buckets[split_assign(seed, fractions)].append(line)
    for out, lines in zip(out_paths, buckets):
        with open(out, "w", encoding="utf-8") as f:
            f.write(header + "\n")
            for line in lines:
                f.write(line + "\n")
    return out_paths


def scan_for_holdout(path, lexicon: Lexicon) -> list[int]:
    """Line numbers of records whose command text uses a holdout synonym."""
    bad = []
    with open(path, encoding="utf-8") as f:
        f.readline()
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            if lexicon.contains_holdout(json.loads(line)["command"]):
                bad.append(lineno)
    return bad
