import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semtraj.geom import (
    AXIS_Y,
    AugmentationRejected,
    GenerationError,
    SceneObject,
    World,
    WorldGenConfig,
    check_world_invariants,
    gen_random_world,
    min_dist,
    resample,
    signed_axis_offset,
    transform,
)


def test_resample_midpoint():
    out = resample(np.array([[0.0, 0.0], [1.0, 1.0]]), 3)
    np.testing.assert_allclose(out, [[0, 0], [0.5, 0.5], [1, 1]], atol=1e-12)


def test_resample_identity_on_even_spacing():
    traj = np.linspace([0.0, 0.0], [1.0, 0.5], 7)
    out = resample(traj, 7)
    np.testing.assert_allclose(out, traj, atol=1e-9)


def test_resample_l_shape_arc_lengths():
    # hand arc-length parameterization: corner path of total length 2,
    # waypoints at arc lengths {0, 0.5, 1.0, 1.5, 2.0}
    traj = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    out = resample(traj, 5)
    expected = np.array([[0, 0], [0.5, 0], [1, 0], [1, 0.5], [1, 1]])
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_resample_rejects_bad_n():
    with pytest.raises(ValueError):
        resample(np.array([[0.0, 0.0], [1.0, 1.0]]), 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=11), st.integers(0, 60))
def test_resample_idempotent(slopes, n_extra):
    # scope: planner-class polylines (8-connected grid paths have |dy| <= dx
    # per step, so turns stay within 90 degrees and an equal-spacing fixpoint
    # exists). Sharper reversals or chords comparable to feature size can
    # have no fixpoint at all; the planner produces neither.
    dx = 1.0 / len(slopes)
    xs = np.concatenate([[0.0], np.cumsum([dx] * len(slopes))])
    ys = np.concatenate([[0.5], 0.5 + np.cumsum([s * dx for s in slopes])])
    traj = np.column_stack([xs, ys])
    n = 2 * len(traj) + n_extra
    once = resample(traj, n)
    twice = resample(once, n)
    np.testing.assert_allclose(twice, once, atol=1e-9)


def test_resample_idempotent_on_folds():
    # a fold whose end is the global extreme still has a consistent fixpoint
    traj = np.array([[0.0, 0.5], [0.0, 0.0], [0.0, 1.0]])
    once = resample(traj, 3)
    twice = resample(once, 3)
    np.testing.assert_allclose(twice, once, atol=1e-9)


def test_min_dist_zero_when_on_trajectory():
    traj = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.9]])
    assert min_dist(traj, (0.5, 0.5)) == 0.0


def test_min_dist_matches_brute_force():
    traj = resample(np.array([[0.0, 0.0], [1.0, 0.0]]), 100)
    p = np.array([0.5, 0.5])
    brute = min(math.hypot(x - p[0], y - p[1]) for x, y in traj)
    assert min_dist(traj, p) == pytest.approx(brute)
    assert min_dist(traj, p) == pytest.approx(0.5, abs=1e-3)


def test_min_dist_translation_invariant():
    traj = np.array([[0.1, 0.2], [0.4, 0.8]])
    p = np.array([0.3, 0.3])
    shift = np.array([0.05, -0.07])
    assert min_dist(traj + shift, p + shift) == pytest.approx(min_dist(traj, p))


def test_signed_axis_offset_examples():
    obj = SceneObject("cup", (0.5, 0.5))
    traj = np.array([[0.2, 0.6], [0.8, 0.6]])
    assert signed_axis_offset(traj, obj, AXIS_Y) == pytest.approx(0.1)
    # reflection flips the sign
    flipped = traj.copy()
    flipped[:, 1] = 1.0 - flipped[:, 1]
    obj2 = SceneObject("cup", (0.5, 0.5))
    assert signed_axis_offset(flipped, obj2, AXIS_Y) == pytest.approx(-0.1)


def test_signed_axis_offset_zero_at_coincidence():
    obj = SceneObject("cup", (0.3, 0.3))
    traj = np.array([[0.3, 0.3], [0.9, 0.9]])
    assert signed_axis_offset(traj, obj, AXIS_Y) == 0.0


def _simple_world():
    return World(objects=[SceneObject("mug", (0.3, 0.4))],
                 start=np.array([0.1, 0.1]), goal=np.array([0.9, 0.9]))


def test_transform_identity():
    world = _simple_world()
    traj = np.array([[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]])
    w2, t2 = transform(world, traj, rotation=0.0, scale=1.0)
    np.testing.assert_allclose(t2, traj, atol=1e-12)
    np.testing.assert_allclose(w2.objects[0].position, world.objects[0].position, atol=1e-12)


def test_transform_rotation_about_center():
    world = _simple_world()
    traj = np.array([[0.6, 0.5], [0.5, 0.5], [0.4, 0.5]])
    _, t2 = transform(world, traj, rotation=math.pi, scale=1.0)
    np.testing.assert_allclose(t2[0], [0.4, 0.5], atol=1e-12)


def test_transform_isometry_preserves_distances():
    world = World(objects=[SceneObject("mug", (0.5, 0.45))],
                  start=np.array([0.35, 0.35]), goal=np.array([0.6, 0.6]))
    traj = np.array([[0.35, 0.35], [0.6, 0.7], [0.5, 0.4]])
    _, t2 = transform(world, traj, rotation=1.234, scale=1.0)
    d_before = np.linalg.norm(np.diff(traj, axis=0), axis=1)
    d_after = np.linalg.norm(np.diff(t2, axis=0), axis=1)
    np.testing.assert_allclose(d_after, d_before, atol=1e-9)


def test_transform_rejects_out_of_workspace():
    world = _simple_world()
    traj = np.array([[0.05, 0.05], [0.95, 0.95]])
    with pytest.raises(AugmentationRejected):
        transform(world, traj, rotation=0.0, scale=1.4)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2 * math.pi - 1e-9), st.floats(0.8, 1.2))
def test_transform_roundtrip(rotation, scale):
    world = _simple_world()
    traj = np.array([[0.45, 0.45], [0.5, 0.55], [0.55, 0.5]])
    try:
        w2, t2 = transform(world, traj, rotation, scale)
        w3, t3 = transform(w2, t2, -rotation, 1.0)
        w4, t4 = transform(w3, t3, 0.0, 1.0 / scale)
    except AugmentationRejected:
        return
    np.testing.assert_allclose(t4, traj, atol=1e-7)
    np.testing.assert_allclose(w4.start, world.start, atol=1e-7)


def test_gen_random_world_deterministic():
    cfg = WorldGenConfig(labels=["glass", "cup", "phone", "book", "vase", "plant", "mug"])
    w1 = gen_random_world(42, cfg)
    w2 = gen_random_world(42, cfg)
    assert w1.labels == w2.labels
    np.testing.assert_array_equal(w1.positions(), w2.positions())
    np.testing.assert_array_equal(w1.start, w2.start)
    np.testing.assert_array_equal(w1.goal, w2.goal)


def test_gen_random_world_invariants_many_seeds():
    cfg = WorldGenConfig(labels=["glass", "cup", "phone", "book", "vase", "plant", "mug"])
    for seed in range(1000):
        world = gen_random_world(seed, cfg)
        check_world_invariants(world, cfg)


def test_gen_random_world_infeasible_raises():
    cfg = WorldGenConfig(min_objects=16, max_objects=16, min_object_spacing=0.5,
                         max_attempts=2000, labels=["x"] * 16)
    with pytest.raises(GenerationError):
        gen_random_world(0, cfg)


def test_gen_random_world_rejects_bad_range():
    cfg = WorldGenConfig(min_objects=0, max_objects=3)
    with pytest.raises(ValueError):
        gen_random_world(0, cfg)
