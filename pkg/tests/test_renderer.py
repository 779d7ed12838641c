import numpy as np
import pytest

from src.errors import RenderError
from src.geometry import CameraIntrinsics, CameraPose
from src.renderer import (
    RenderSettings,
    composite_pixel,
    project_gaussian,
    project_scene,
    render,
)
from src.scene import AdaptiveModulator, AppearanceTable, GaussianPrimitive, GaussianScene, logit, sigmoid

IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])


def random_scene(rng, n):
    mu = np.column_stack([rng.uniform(-2, 2, n), rng.uniform(-2, 2, n), rng.uniform(4, 9, n)])
    log_scale = np.log(rng.uniform(0.05, 0.5, size=(n, 3)))
    rotation_q = rng.normal(size=(n, 4))
    color = rng.uniform(0, 1, size=(n, 3))
    logit_opacity = np.array([logit(p) for p in rng.uniform(0.05, 0.95, n)])
    mod = AdaptiveModulator.create(feature_dim=4, hidden=6, rng=rng, weight_std=0.5, output_bias=2.0)
    mod.sca.w2[:] = rng.normal(0.0, 0.5, 6)
    mod.opa.w2[:] = rng.normal(0.0, 0.5, 6)
    return GaussianScene(mu, log_scale, rotation_q, color, logit_opacity,
                         rng.normal(size=(n, 4)), rng.normal(size=(n, 4)), modulator=mod)


def on_axis_scene(depths, opacities, colors):
    n = len(depths)
    mu = np.column_stack([np.zeros(n), np.zeros(n), depths])
    return GaussianScene(mu, np.full((n, 3), np.log(0.2)), np.tile(IDENTITY_Q, (n, 1)), np.array(colors),
                         np.array([logit(p) for p in opacities]), np.zeros((n, 2)), np.zeros((n, 2)),
                         modulator=AdaptiveModulator.zeros(feature_dim=2, hidden=3))


def brute_force_render(batch, width, height, settings):
    """Composite every visible splat at every pixel in global (depth, index) order."""
    ids = np.flatnonzero(batch.visible)
    order = ids[np.lexsort((ids, batch.depth[ids]))]
    ys, xs = np.mgrid[0:height, 0:width]
    px, py = xs.astype(np.float64), ys.astype(np.float64)
    color = np.zeros((height, width, 3))
    transmittance = np.ones((height, width))
    for i in order:
        dx = px - batch.mean2d[i, 0]
        dy = py - batch.mean2d[i, 1]
        a, b, c = batch.conic[i]
        power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
        alpha = np.minimum(batch.opacity[i] * np.exp(np.minimum(power, 0.0)), settings.alpha_clip)
        alpha = np.where(alpha >= settings.min_alpha, alpha, 0.0)
        color += (alpha * transmittance)[..., None] * batch.color[i]
        transmittance *= 1.0 - alpha
    return color + transmittance[..., None] * settings.background_array


def test_composite_pixel_examples():
    bg = np.array([0.2, 0.4, 0.6])
    assert np.array_equal(composite_pixel([], bg), bg)

    c = np.array([1.0, 0.5, 0.0])
    assert np.allclose(composite_pixel([(1.0, c)], bg), 0.99 * c + 0.01 * bg)

    front, back = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    out = composite_pixel([(0.4, front), (0.5, back)], np.zeros(3))
    assert np.allclose(out, 0.4 * front + 0.6 * 0.5 * back)


def test_composite_pixel_skips_faint_entries():
    c = np.array([1.0, 1.0, 1.0])
    assert np.array_equal(composite_pixel([(0.001, c)], np.zeros(3), min_alpha=1 / 255), np.zeros(3))


def test_composite_pixel_equal_colors_commute():
    c = np.array([0.3, 0.6, 0.9])
    a = composite_pixel([(0.3, c), (0.7, c)], np.zeros(3))
    b = composite_pixel([(0.7, c), (0.3, c)], np.zeros(3))
    assert np.allclose(a, b)


def test_project_gaussian_examples():
    intr = CameraIntrinsics(50.0, 50.0, 31.5, 31.5, 64, 64)
    pose = CameraPose.identity()
    g = GaussianPrimitive(np.array([0.0, 0.0, 5.0]), np.zeros(3), IDENTITY_Q, np.full(3, 0.5), 0.0,
                          np.zeros(2), np.zeros(2))
    splat = project_gaussian(g, 0.5, np.full(3, 0.2), intr, pose)
    assert np.allclose(splat.mean2d, [31.5, 31.5])
    assert splat.depth == pytest.approx(5.0)
    assert np.allclose(splat.cov2d, ((50.0 * 0.2 / 5.0) ** 2 + 0.3) * np.eye(2), rtol=1e-12)
    assert splat.alpha_at(splat.mean2d) == pytest.approx(0.5)

    near = GaussianPrimitive(np.array([0.0, 0.0, 0.001]), np.zeros(3), IDENTITY_Q, np.full(3, 0.5), 0.0,
                             np.zeros(2), np.zeros(2))
    assert project_gaussian(near, 0.5, np.full(3, 0.2), intr, pose) is None
    behind = GaussianPrimitive(np.array([0.0, 0.0, -5.0]), np.zeros(3), IDENTITY_Q, np.full(3, 0.5), 0.0,
                               np.zeros(2), np.zeros(2))
    assert project_gaussian(behind, 0.5, np.full(3, 0.2), intr, pose) is None


def test_offscreen_gaussian_is_culled():
    intr = CameraIntrinsics(50.0, 50.0, 31.5, 31.5, 64, 64)
    g = GaussianPrimitive(np.array([20.0, 0.0, 5.0]), np.log(np.full(3, 0.1)), IDENTITY_Q, np.full(3, 0.5), 0.0,
                          np.zeros(2), np.zeros(2))
    assert project_gaussian(g, 0.5, np.full(3, 0.1), intr, CameraPose.identity()) is None


def test_empty_pixel_gets_background():
    intr = CameraIntrinsics(50.0, 50.0, 32.0, 32.0, 64, 64)
    scene = GaussianScene(np.array([[-2.9, -2.9, 5.0]]), np.full((1, 3), np.log(0.05)), IDENTITY_Q[None],
                          np.array([[1.0, 1.0, 1.0]]), np.array([logit(0.9)]), np.zeros((1, 2)),
                          np.zeros((1, 2)), modulator=AdaptiveModulator.zeros(feature_dim=2, hidden=3))
    settings = RenderSettings(background=(0.2, 0.3, 0.4))
    out = render(scene, intr, CameraPose.identity(), settings)
    assert np.array_equal(out.image[60, 60], [0.2, 0.3, 0.4])
    assert out.alpha[60, 60] == 0.0


def test_single_centered_splat():
    intr = CameraIntrinsics(50.0, 50.0, 32.0, 32.0, 64, 64)
    c = [0.2, 0.6, 1.0]
    scene = on_axis_scene([5.0], [0.8], [c])
    out = render(scene, intr, CameraPose.identity())
    alpha = 0.5 * float(sigmoid(logit(0.8)))
    assert np.allclose(out.image[32, 32], alpha * np.array(c), rtol=1e-12)
    assert out.alpha[32, 32] == pytest.approx(alpha)
    assert out.depth[32, 32] == pytest.approx(alpha * 5.0)


def test_two_overlapping_splats():
    intr = CameraIntrinsics(50.0, 50.0, 32.0, 32.0, 64, 64)
    c1, c2 = np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])
    # listed back first so the depth sort has work to do
    scene = on_axis_scene([8.0, 5.0], [0.6, 0.8], [c2, c1])
    out = render(scene, intr, CameraPose.identity())
    a1 = 0.5 * float(sigmoid(logit(0.8)))
    a2 = 0.5 * float(sigmoid(logit(0.6)))
    assert np.allclose(out.image[32, 32], a1 * c1 + (1 - a1) * a2 * c2, rtol=1e-12)


def test_tiled_render_matches_brute_force():
    rng = np.random.default_rng(0)
    intr = CameraIntrinsics(60.0, 60.0, 31.5, 31.5, 64, 64)
    pose = CameraPose.identity()
    settings = RenderSettings(background=(0.1, 0.2, 0.3))
    for k in range(100):
        scene = random_scene(rng, int(rng.integers(1, 51)))
        out = render(scene, intr, pose, settings)
        batch = project_scene(scene, intr, pose, settings)
        expected = brute_force_render(batch, 64, 64, settings)
        assert np.max(np.abs(out.image - expected)) < 1e-6

        if k < 10:
            splats = sorted(batch.visible_splats(), key=lambda s: (s.depth, s.index))
            for _ in range(5):
                u, v = (int(x) for x in rng.integers(0, 64, 2))
                entries = [(s.alpha_at((u, v), settings.alpha_clip), s.color) for s in splats]
                pixel = composite_pixel(entries, settings.background_array, settings.alpha_clip,
                                        settings.min_alpha)
                assert np.allclose(out.image[v, u], pixel, atol=1e-6)


def test_render_is_deterministic_across_workers():
    rng = np.random.default_rng(1)
    intr = CameraIntrinsics(60.0, 60.0, 31.5, 31.5, 64, 64)
    scene = random_scene(rng, 40)
    first = render(scene, intr, CameraPose.identity(), RenderSettings())
    second = render(scene, intr, CameraPose.identity(), RenderSettings())
    threaded = render(scene, intr, CameraPose.identity(), RenderSettings(workers=4))
    assert np.array_equal(first.image, second.image)
    assert np.array_equal(first.image, threaded.image)
    assert np.all((first.alpha >= 0.0) & (first.alpha <= 1.0))


def test_render_applies_appearance():
    rng = np.random.default_rng(2)
    intr = CameraIntrinsics(60.0, 60.0, 31.5, 31.5, 64, 64)
    scene = random_scene(rng, 10)
    scene.appearance = AppearanceTable.create(['view'], dim=2)
    scene.appearance.bias_b[:] = [0.1, 0.0, -0.1]
    plain = render(scene, intr, CameraPose.identity()).image
    adapted = render(scene, intr, CameraPose.identity(), image_id='view').image
    assert np.allclose(adapted, np.clip(plain + [0.1, 0.0, -0.1], 0.0, 1.0))


def test_render_empty_scene_is_an_error():
    intr = CameraIntrinsics(60.0, 60.0, 31.5, 31.5, 64, 64)
    empty = GaussianScene(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)), np.zeros(0),
                          np.zeros((0, 2)), np.zeros((0, 2)), modulator=AdaptiveModulator.zeros(2, 3))
    with pytest.raises(RenderError):
        render(empty, intr, CameraPose.identity())


def test_render_settings_validation():
    with pytest.raises(RenderError):
        RenderSettings(tile_size=0)
    with pytest.raises(RenderError):
        RenderSettings(near=1.0, far=0.5)
    with pytest.raises(RenderError):
        RenderSettings(background=(2.0, 0.0, 0.0))
