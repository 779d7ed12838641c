import numpy as np
import pytest

from src.errors import TrajectoryError
from src.geometry import CameraIntrinsics, project_points
from src.trajectories import (
    DEFAULT_SCHEDULE,
    StrategyKind,
    TrajectoryStrategy,
    altitude_schedule,
    estimate_ground_height,
    generate,
    look_at,
)

INTR = CameraIntrinsics(50.0, 50.0, 31.5, 31.5, 64, 64)


def aerial_cameras(count=6, height=100.0, seed=0):
    rng = np.random.default_rng(seed)
    cameras = []
    for k in range(count):
        theta = 2 * np.pi * k / count
        position = np.array([30 * np.cos(theta), 30 * np.sin(theta), height])
        pose = look_at(position, rng.uniform(-5, 5, 3) * [1, 1, 0])
        cameras.append((f"cam{k}", INTR, pose))
    return cameras


def test_look_at_straight_down():
    pose = look_at([0.0, 0.0, 10.0], [0.0, 0.0, 0.0], up=[0.0, 1.0, 0.0])
    assert np.allclose(pose.forward, [0.0, 0.0, -1.0])
    assert np.allclose(pose.rotation[:, 0], [1.0, 0.0, 0.0])
    assert np.allclose(pose.rotation[:, 1], [0.0, -1.0, 0.0])
    assert np.allclose(pose.center, [0.0, 0.0, 10.0])


def test_look_at_degenerate_inputs():
    with pytest.raises(TrajectoryError):
        look_at([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(TrajectoryError):
        look_at([0.0, 0.0, 10.0], [0.0, 0.0, 0.0])


def test_scaled_halves_altitude_and_keeps_orientation():
    base = aerial_cameras()
    plan = generate(TrajectoryStrategy(StrategyKind.SCALED, altitude_factor=0.5), base, np.zeros(3))
    assert len(plan) == len(base)
    for cam, (cam_id, _, pose) in zip(plan.cameras, base):
        assert cam.pose.center[2] == pytest.approx(50.0)
        assert np.allclose(cam.pose.center[:2], pose.center[:2])
        assert np.array_equal(cam.pose.rotation, pose.rotation)
        assert cam.camera_id == f"s0_scaled_{cam_id}"
        assert cam.source_id == cam_id


def test_scaled_respects_ground_height():
    base = aerial_cameras(height=110.0)
    plan = generate(TrajectoryStrategy(StrategyKind.SCALED, altitude_factor=0.5), base, np.zeros(3),
                    ground_height=10.0, stage=3)
    assert all(cam.pose.center[2] == pytest.approx(60.0) for cam in plan.cameras)
    assert all(cam.stage == 3 for cam in plan.cameras)


def test_forward_slides_along_view_axis():
    base = aerial_cameras()
    plan = generate(TrajectoryStrategy(StrategyKind.FORWARD, altitude_factor=0.3), base, np.zeros(3))
    for cam, (_, _, pose) in zip(plan.cameras, base):
        assert cam.pose.center[2] == pytest.approx(30.0)
        offset = cam.pose.center - pose.center
        assert np.allclose(np.cross(offset, pose.forward), 0.0, atol=1e-9)
        assert offset @ pose.forward > 0
        assert np.array_equal(cam.pose.rotation, pose.rotation)


def test_noise_free_stochastic_variants_match_deterministic():
    base = aerial_cameras()
    quiet = dict(altitude_factor=0.5, yaw_std_deg=0.0, pitch_std_deg=0.0)
    forward = generate(TrajectoryStrategy(StrategyKind.FORWARD, **quiet), base, np.zeros(3))
    scaled = generate(TrajectoryStrategy(StrategyKind.SCALED, **quiet), base, np.zeros(3))
    noisy_forward = generate(TrajectoryStrategy(StrategyKind.STOCHASTIC_FORWARD, **quiet), base, np.zeros(3))
    all_forward = generate(TrajectoryStrategy(StrategyKind.STOCHASTIC_SCALED_FORWARD, forward_fraction=1.0,
                                              **quiet), base, np.zeros(3))
    no_forward = generate(TrajectoryStrategy(StrategyKind.STOCHASTIC_SCALED_FORWARD, forward_fraction=0.0,
                                             **quiet), base, np.zeros(3))
    for a, b, c, d, e in zip(forward.cameras, noisy_forward.cameras, all_forward.cameras,
                             scaled.cameras, no_forward.cameras):
        assert np.array_equal(a.pose.center, b.pose.center)
        assert np.array_equal(a.pose.rotation, b.pose.rotation)
        assert np.array_equal(a.pose.center, c.pose.center)
        assert np.array_equal(d.pose.center, e.pose.center)
        assert np.array_equal(d.pose.rotation, e.pose.rotation)


def test_stochastic_noise_is_seeded():
    base = aerial_cameras()
    strategy = TrajectoryStrategy(StrategyKind.STOCHASTIC_FORWARD, altitude_factor=0.7, seed=5)
    first = generate(strategy, base, np.zeros(3))
    second = generate(strategy, base, np.zeros(3))
    other = generate(TrajectoryStrategy(StrategyKind.STOCHASTIC_FORWARD, altitude_factor=0.7, seed=6),
                     base, np.zeros(3))
    for a, b in zip(first.cameras, second.cameras):
        assert np.array_equal(a.pose.rotation, b.pose.rotation)
    assert any(not np.array_equal(a.pose.rotation, b.pose.rotation)
               for a, b in zip(first.cameras, other.cameras))
    for cam, (_, _, pose) in zip(first.cameras, base):
        assert not np.array_equal(cam.pose.rotation, pose.rotation)
        assert cam.pose.center[2] == pytest.approx(70.0)


def test_horizontal_camera_is_reported_not_moved():
    base = aerial_cameras(count=3)
    base.append(('level', INTR, look_at([0.0, 0.0, 100.0], [50.0, 0.0, 100.0])))
    plan = generate(TrajectoryStrategy(StrategyKind.FORWARD, altitude_factor=0.5), base, np.zeros(3))
    assert len(plan) == 3
    assert [cam_id for cam_id, _ in plan.errors] == ['level']


def test_elliptical_cameras_look_at_centroid():
    base = aerial_cameras(count=5)
    centroid = np.array([1.0, -2.0, 0.5])
    plan = generate(TrajectoryStrategy(StrategyKind.ELLIPTICAL, altitude_factor=0.5, sample_count=12),
                    base, centroid, stage=1)
    assert len(plan) == 12
    heights = np.array([pose.center[2] for _, _, pose in base])
    for cam in plan.cameras:
        assert cam.pose.center[2] == pytest.approx(0.5 * heights.mean())
        uv, z = project_points(cam.intrinsics, cam.pose, centroid)
        assert z[0] > 0
        assert np.allclose(uv[0], [INTR.cx, INTR.cy], atol=1e-6)
    assert plan.cameras[0].camera_id == 's1_elliptical_0000'


def test_elliptical_ring_contains_base_footprint():
    base = aerial_cameras(count=8)
    plan = generate(TrajectoryStrategy(StrategyKind.ELLIPTICAL, altitude_factor=0.9), base, np.zeros(3))
    assert len(plan) == 8
    ring = np.array([cam.pose.center[:2] for cam in plan.cameras])
    base_xy = np.array([pose.center[:2] for _, _, pose in base])
    assert np.linalg.norm(ring, axis=1).min() >= np.linalg.norm(base_xy, axis=1).max() - 1e-9


def test_generate_requires_base_cameras():
    with pytest.raises(TrajectoryError):
        generate(TrajectoryStrategy(), [], np.zeros(3))


def test_strategy_validation():
    with pytest.raises(TrajectoryError):
        TrajectoryStrategy(altitude_factor=0.0)
    with pytest.raises(TrajectoryError):
        TrajectoryStrategy(altitude_factor=1.5)
    with pytest.raises(TrajectoryError):
        TrajectoryStrategy(yaw_std_deg=-1.0)
    with pytest.raises(TrajectoryError):
        TrajectoryStrategy(forward_fraction=2.0)
    with pytest.raises(ValueError):
        TrajectoryStrategy(kind='orbit')
    assert TrajectoryStrategy(kind='forward').kind is StrategyKind.FORWARD
    assert TrajectoryStrategy().at_altitude(0.3).altitude_factor == 0.3


def test_altitude_schedule():
    assert altitude_schedule() == list(DEFAULT_SCHEDULE)
    assert altitude_schedule([1.0]) == [1.0]
    assert altitude_schedule([]) == []
    with pytest.raises(TrajectoryError):
        altitude_schedule([0.5, 0.9])
    with pytest.raises(TrajectoryError):
        altitude_schedule([0.5, 0.5])
    with pytest.raises(TrajectoryError):
        altitude_schedule([0.0])


def test_estimate_ground_height():
    points = np.column_stack([np.zeros(100), np.zeros(100), np.linspace(0.0, 99.0, 100)])
    assert estimate_ground_height(points, percentile=0.0) == 0.0
    assert estimate_ground_height(points) == pytest.approx(4.95)
    with pytest.raises(TrajectoryError):
        estimate_ground_height(np.zeros((0, 3)))


def test_first_stage_keeps_centroid_in_view():
    base = aerial_cameras(count=8)
    for kind in StrategyKind:
        plan = generate(TrajectoryStrategy(kind, altitude_factor=0.9, seed=0), base, np.zeros(3))
        assert len(plan) > 0
        for cam in plan.cameras:
            uv, z = project_points(cam.intrinsics, cam.pose, np.zeros(3))
            assert z[0] > 0
            assert 0 <= uv[0, 0] <= INTR.width and 0 <= uv[0, 1] <= INTR.height
