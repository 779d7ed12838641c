import numpy as np
import pytest

from src.data import (
    ColmapImage,
    StageRecordStorage,
    decode_checkpoint,
    encode_checkpoint,
    format_colmap_images,
    format_ply_points,
    format_plan,
    load_checkpoint,
    load_dataset,
    parse_colmap_cameras,
    parse_colmap_images,
    parse_colmap_points3d,
    parse_plan,
    parse_ply_points,
    parse_splits,
    read_colmap_model,
    read_image,
    read_plan,
    save_checkpoint,
    write_colmap_model,
    write_dataset,
    write_image,
    write_plan,
)
from src.errors import CheckpointError, CheckpointVersionError, ParseError
from src.geometry import CameraIntrinsics, CameraPose
from src.geometry.rotations import random_rotation
from src.pipeline import FilterVerdict, RefinementStage, StageView
from src.scene import AdaptiveModulator, GaussianScene, init_from_points
from src.trajectories import PlannedCamera, StrategyKind, TrajectoryPlan, TrajectoryStrategy, look_at

CAMERAS_TXT = """# Camera list with one line of data per camera:
1 PINHOLE 640 480 500.0 510.0 320.0 240.0
2 SIMPLE_PINHOLE 100 80 90.0 49.5 39.5
"""

IMAGES_TXT = """# Image list with two lines of data per image:
1 1.0 0.0 0.0 0.0 0.0 0.0 5.0 1 front.png
100.0 200.0 -1 300.5 12.0 7
2 0.7071067811865476 0.0 0.7071067811865476 0.0 1.0 2.0 3.0 2 side image.png

"""

POINTS_TXT = """# 3D point list
1 0.5 -1.0 2.0 255 0 128 0.1 1 0 2 3
2 1.0 1.0 1.0 0 255 0 0.2
"""


def random_pose(rng):
    return CameraPose(random_rotation(rng), rng.normal(size=3) * 5)


def sample_scene(n=6, seed=0):
    rng = np.random.default_rng(seed)
    scene = init_from_points(rng.uniform(-3, 3, size=(n, 3)), rng.uniform(size=(n, 3)), feature_dim=3,
                             hidden=4, appearance_ids=['aerial_000', 'aerial_001'], appearance_dim=2, rng=rng)
    scene.modulator.sca.w2[:] = rng.normal(size=4)
    scene.appearance.embeddings[:] = rng.normal(size=(2, 2))
    return scene


def sample_stage():
    rng = np.random.default_rng(3)
    intr = CameraIntrinsics(20.0, 20.0, 7.5, 7.5, 16, 16)
    strategy = TrajectoryStrategy(StrategyKind.FORWARD, altitude_factor=0.5, seed=2)
    cameras = [PlannedCamera(f"s1_forward_cam{k}", intr, look_at([k + 1.0, 0.5, 5.0], [0.0, 0.0, 0.0]), 1,
                             f"cam{k}") for k in range(3)]
    plan = TrajectoryPlan(strategy, 1, cameras, [('cam9', 'Camera has no downward viewing component')])
    views = [
        StageView(cameras[0], 'cam0', rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3)),
                  FilterVerdict(True, 1.0, 0.12)),
        StageView(cameras[1], 'cam1', rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3)),
                  FilterVerdict(False, 0.0, 0.41)),
        StageView(cameras[2], 'cam0', rng.uniform(size=(16, 16, 3)), None,
                  FilterVerdict(False, 0.0, float('nan'), 'fixer failed: boom')),
    ]
    return RefinementStage(1, 0.5, plan, views, [0.3, 0.25, 0.2],
                           {'ground_psnr': 21.5, 'acceptance_rate': 1 / 3, 'mean_dssim': float('nan')})


def test_parse_colmap_cameras():
    cameras = parse_colmap_cameras(CAMERAS_TXT)
    assert cameras[1] == CameraIntrinsics(500.0, 510.0, 320.0, 240.0, 640, 480)
    assert cameras[2].fx == cameras[2].fy == 90.0
    assert (cameras[2].width, cameras[2].height) == (100, 80)


def test_parse_colmap_cameras_errors():
    with pytest.raises(ParseError) as info:
        parse_colmap_cameras("1 OPENCV 640 480 1 2 3 4 0 0 0 0\n", source='cameras.txt')
    assert info.value.line == 1
    assert 'cameras.txt' in str(info.value)
    with pytest.raises(ParseError):
        parse_colmap_cameras("1 PINHOLE 640 480 1 2 3\n")
    with pytest.raises(ParseError):
        parse_colmap_cameras(CAMERAS_TXT + "1 PINHOLE 10 10 1 1 5 5\n")


def test_parse_colmap_images():
    images = parse_colmap_images(IMAGES_TXT, parse_colmap_cameras(CAMERAS_TXT))
    assert sorted(images) == [1, 2]
    front = images[1]
    assert front.name == 'front.png'
    assert np.allclose(front.pose.rotation, np.eye(3))
    assert np.allclose(front.pose.center, [0.0, 0.0, -5.0])
    side = images[2]
    assert side.name == 'side image.png'
    assert side.camera_id == 2
    w2c = side.pose.world_to_camera
    assert np.allclose(w2c @ side.pose.center + np.array([1.0, 2.0, 3.0]), 0.0, atol=1e-12)


def test_parse_colmap_images_errors():
    cameras = parse_colmap_cameras(CAMERAS_TXT)
    with pytest.raises(ParseError):
        parse_colmap_images("1 0 0 0 0 0 0 0 1 zero.png\n\n", cameras)
    with pytest.raises(ParseError):
        parse_colmap_images("1 1 0 0 0 0 0 0 7 orphan.png\n\n", cameras)
    with pytest.raises(ParseError) as info:
        parse_colmap_images("1 1 0 0 0 0 0 0 1\n")
    assert info.value.line == 1


def test_parse_colmap_points3d():
    positions, colors = parse_colmap_points3d(POINTS_TXT)
    assert np.allclose(positions, [[0.5, -1.0, 2.0], [1.0, 1.0, 1.0]])
    assert np.allclose(colors[0], [1.0, 0.0, 128 / 255])
    empty, _ = parse_colmap_points3d("# nothing\n")
    assert empty.shape == (0, 3)


def test_colmap_model_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    cameras = {1: CameraIntrinsics(50.5, 51.25, 31.5, 23.5, 64, 48)}
    images = {k: ColmapImage(k, f"img_{k}.png", 1, random_pose(rng)) for k in range(1, 6)}
    positions = rng.normal(size=(10, 3))
    colors = rng.integers(0, 256, size=(10, 3)) / 255.0
    write_colmap_model(tmp_path, cameras, images, positions, colors)
    cams2, imgs2, (pos2, col2) = read_colmap_model(tmp_path)
    assert cams2 == cameras
    for k, img in images.items():
        assert imgs2[k].name == img.name
        assert np.allclose(imgs2[k].pose.rotation, img.pose.rotation, atol=1e-12)
        assert np.allclose(imgs2[k].pose.center, img.pose.center, atol=1e-12)
    assert np.array_equal(pos2, positions)
    assert np.allclose(col2, colors)


def test_format_colmap_images_lists_points_line():
    pose = CameraPose.identity()
    text = format_colmap_images({3: ColmapImage(3, 'a.png', 1, pose)})
    content = [line for line in text.splitlines() if not line.startswith('#')]
    assert content[0].split()[:5] == ['3', '1.0', '0.0', '0.0', '0.0']
    assert content[1] == ''


def test_ply_ascii_and_binary_agree():
    rng = np.random.default_rng(5)
    positions = rng.normal(size=(12, 3))
    colors = rng.integers(0, 256, size=(12, 3)) / 255.0
    pos_a, col_a = parse_ply_points(format_ply_points(positions, colors))
    pos_b, col_b = parse_ply_points(format_ply_points(positions, colors, binary=True))
    assert np.array_equal(pos_a, positions)
    assert np.array_equal(pos_a, pos_b)
    assert np.array_equal(col_a, col_b)
    assert np.allclose(col_a, colors)


def test_ply_without_colors_is_mid_gray():
    positions, colors = parse_ply_points(format_ply_points(np.zeros((3, 3))))
    assert positions.shape == (3, 3)
    assert np.array_equal(colors, np.full((3, 3), 0.5))


def test_ply_float_colors_and_extra_elements():
    data = (b"ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float x\nproperty float y\n"
            b"property float z\nproperty float red\nproperty float green\nproperty float blue\n"
            b"element face 0\nproperty int flags\nend_header\n"
            b"1 2 3 0.5 0.25 1.0\n4 5 6 0 0 0\n")
    positions, colors = parse_ply_points(data)
    assert np.allclose(positions, [[1, 2, 3], [4, 5, 6]])
    assert np.allclose(colors[0], [0.5, 0.25, 1.0])


def test_ply_errors():
    binary = format_ply_points(np.ones((4, 3)), binary=True)
    with pytest.raises(ParseError):
        parse_ply_points(binary[:-5])
    with pytest.raises(ParseError):
        parse_ply_points(b"not a ply file")
    with pytest.raises(ParseError):
        parse_ply_points(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n")
    with pytest.raises(ParseError):
        parse_ply_points(b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n")
    with pytest.raises(ParseError):
        parse_ply_points(b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                         b"property float z\nend_header\n1 2 3\n")
    for fmt in (b'ascii', b'binary_little_endian'):
        with pytest.raises(ParseError, match="Negative element count"):
            parse_ply_points(b"ply\nformat " + fmt + b" 1.0\nelement vertex -1\nproperty float x\n"
                             b"property float y\nproperty float z\nend_header\n1 2 3\n")


def test_plan_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    intr = CameraIntrinsics(40.25, 40.5, 15.5, 11.5, 32, 24)
    cameras = [PlannedCamera(f"s2_scaled_cam{k}", intr, random_pose(rng), 2, f"cam{k}") for k in range(4)]
    cameras.append(PlannedCamera('s2_elliptical_0000', intr, random_pose(rng), 2, None))
    path = write_plan(tmp_path / 'plans' / 'stage_2.txt', cameras)
    loaded = read_plan(path)
    assert len(loaded) == 5
    for a, b in zip(cameras, loaded):
        assert a.camera_id == b.camera_id
        assert a.stage == b.stage
        assert a.source_id == b.source_id
        assert a.intrinsics == b.intrinsics
        assert np.array_equal(a.pose.rotation, b.pose.rotation)
        assert np.array_equal(a.pose.center, b.pose.center)
    assert format_plan(loaded) == format_plan(cameras)


def test_plan_parse_errors():
    with pytest.raises(ParseError) as info:
        parse_plan("# header\ncam 0 - 1 2 3\n")
    assert info.value.line == 2
    line = "cam 0 - 2 0 0 0 0 1 0 0 0 0 1 0 10 10 5 5 10 10"
    with pytest.raises(ParseError):
        parse_plan(line + "\n")
    assert parse_plan("\n# only comments\n") == []


def test_checkpoint_round_trip(tmp_path):
    scene = sample_scene()
    path = save_checkpoint(scene, tmp_path / 'scene.pdgs')
    loaded = load_checkpoint(path)
    assert len(loaded) == len(scene)
    assert loaded.appearance.image_ids == ['aerial_000', 'aerial_001']
    for name, value in scene.parameters().items():
        assert np.allclose(loaded.parameters()[name], value, rtol=1e-6, atol=1e-7), name
    again = decode_checkpoint(encode_checkpoint(loaded))
    for name, value in loaded.parameters().items():
        assert np.array_equal(again.parameters()[name], value), name


def test_checkpoint_empty_scene():
    empty = GaussianScene(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)), np.zeros(0),
                          np.zeros((0, 2)), np.zeros((0, 2)), modulator=AdaptiveModulator.zeros(2, 3))
    loaded = decode_checkpoint(encode_checkpoint(empty))
    assert len(loaded) == 0
    assert loaded.feature_dim == 2


def test_checkpoint_errors():
    data = encode_checkpoint(sample_scene())
    with pytest.raises(CheckpointError):
        decode_checkpoint(b'XXXX' + data[4:])
    future = data[:4] + np.array([2], dtype='<u4').tobytes() + data[8:]
    with pytest.raises(CheckpointVersionError):
        decode_checkpoint(future)
    with pytest.raises(CheckpointError):
        decode_checkpoint(data[:-3])
    with pytest.raises(CheckpointError):
        decode_checkpoint(data + b'\x00')
    with pytest.raises(CheckpointError):
        decode_checkpoint(b'PD')


def test_image_round_trip(tmp_path):
    image = np.random.default_rng(7).integers(0, 256, size=(9, 13, 3)) / 255.0
    for suffix in ('.png', '.ppm'):
        path = write_image(tmp_path / f"img{suffix}", image)
        assert np.allclose(read_image(path), image)
    with pytest.raises(ParseError):
        read_image(tmp_path / 'missing.png')


def test_parse_splits():
    names = ['a.png', 'b.png', 'c.png']
    splits = parse_splits("train-aerial: [a.png, b.png]\neval-ground: [c.png]\n", names)
    assert splits == {'a.png': 'train-aerial', 'b.png': 'train-aerial', 'c.png': 'eval-ground'}
    with pytest.raises(ParseError):
        parse_splits("train-aerial: [a.png]\neval-ground: [a.png]\n", names)
    with pytest.raises(ParseError):
        parse_splits("train-aerial: [z.png]\n", names)
    with pytest.raises(ParseError):
        parse_splits("validation: [a.png]\n", names)
    with pytest.raises(ParseError):
        parse_splits("- a.png\n", names)
    assert parse_splits("", names) == {}


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    intr = CameraIntrinsics(20.0, 20.0, 7.5, 5.5, 16, 12)
    images = {k: ColmapImage(k, f"view_{k}.png", 1, random_pose(rng)) for k in range(1, 5)}
    pixels = {k: rng.integers(0, 256, size=(12, 16, 3)) / 255.0 for k in images}
    splits = {'view_1.png': 'train-aerial', 'view_2.png': 'train-aerial', 'view_3.png': 'eval-ground'}
    positions = rng.normal(size=(20, 3))
    scene = load_checkpoint(save_checkpoint(sample_scene(), tmp_path / 'tmp.pdgs'))
    write_dataset(tmp_path / 'ds', {1: intr}, images, pixels, splits, positions, gt_scene=scene)

    bundle = load_dataset(tmp_path / 'ds')
    assert [img.name for img in bundle.split('train-aerial')] == ['view_1.png', 'view_2.png']
    assert [img.name for img in bundle.split('eval-ground')] == ['view_3.png']
    assert np.array_equal(bundle.points, positions)
    assert np.allclose(bundle.colors, 0.5)
    assert np.allclose(bundle.load_pixels(images[3]), pixels[3])
    assert np.array_equal(bundle.gt_scene.mu, scene.mu)
    with pytest.raises(ValueError):
        bundle.split('test')


def test_dataset_without_manifest_trains_on_everything(tmp_path):
    rng = np.random.default_rng(9)
    intr = CameraIntrinsics(20.0, 20.0, 7.5, 5.5, 16, 12)
    images = {1: ColmapImage(1, 'only.png', 1, random_pose(rng))}
    write_colmap_model(tmp_path, {1: intr}, images, rng.normal(size=(3, 3)))
    (tmp_path / 'images').mkdir()
    write_image(tmp_path / 'images' / 'only.png', np.zeros((20, 20, 3)))
    bundle = load_dataset(tmp_path)
    assert bundle.splits == {'only.png': 'train-aerial'}
    assert bundle.points.shape == (3, 3)
    assert bundle.gt_scene is None
    with pytest.raises(ParseError):
        bundle.load_pixels(images[1])


def test_stage_storage_round_trip(tmp_path):
    storage = StageRecordStorage(str(tmp_path))
    stage = sample_stage()
    path = storage.save_stage('run1', stage)
    assert path.exists()

    storage.clear_cache()
    loaded = storage.get_stage('run1', 1)
    assert loaded.index == 1
    assert loaded.altitude_factor == 0.5
    assert loaded.plan.strategy == stage.plan.strategy
    assert loaded.plan.errors == stage.plan.errors
    assert [c.camera_id for c in loaded.plan.cameras] == [c.camera_id for c in stage.plan.cameras]
    assert loaded.losses == stage.losses
    assert loaded.metrics['ground_psnr'] == 21.5
    assert np.isnan(loaded.metrics['mean_dssim'])
    assert loaded.fixed_images[2] is None
    for a, b in zip(loaded.views, stage.views):
        assert a.reference_id == b.reference_id
        assert np.array_equal(a.noisy, b.noisy)
        assert a.verdict.accepted == b.verdict.accepted
        assert a.verdict.reason == b.verdict.reason
    assert np.array_equal(loaded.views[0].fixed, stage.views[0].fixed)
    assert np.isnan(loaded.views[2].verdict.dssim)


def test_stage_storage_listing_and_delete(tmp_path):
    storage = StageRecordStorage(str(tmp_path))
    stage = sample_stage()
    storage.save_stage('run1', stage)
    stage.index = 0
    storage.save_stage('run1', stage)
    assert [s['index'] for s in storage.list_stages('run1')] == [0, 1]
    assert storage.list_stages('run1')[1] == {'index': 1, 'altitude_factor': 0.5, 'views': 3, 'accepted': 1}
    assert storage.list_stages('other') == []

    assert storage.delete_stage('run1', 0)
    assert not storage.delete_stage('run1', 0)
    assert storage.get_stage('run1', 0) is None
    assert [s['index'] for s in storage.list_stages('run1')] == [1]


def test_stage_storage_corrupt_record(tmp_path):
    storage = StageRecordStorage(str(tmp_path))
    (tmp_path / 'run1').mkdir()
    (tmp_path / 'run1' / 'stage_04.json').write_text('{not json', encoding='utf-8')
    with pytest.raises(ParseError):
        storage.get_stage('run1', 4)
    assert storage.list_stages('run1') == []
