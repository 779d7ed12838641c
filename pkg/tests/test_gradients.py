import numpy as np
import pytest

from src.errors import NonFiniteGradientError, RenderError
from src.geometry import CameraIntrinsics, CameraPose
from src.losses import LossConfig, splat_loss
from src.renderer import RenderSettings, check_finite, render, render_with_gradients
from src.scene import AdaptiveModulator, AppearanceTable, GaussianScene, logit

INTR = CameraIntrinsics(40.0, 40.0, 15.5, 15.5, 32, 32)
POSE = CameraPose.identity()
# one tile and no alpha threshold keep the loss smooth in every parameter
SETTINGS = RenderSettings(tile_size=32, min_alpha=0.0, background=(0.3, 0.3, 0.3))
STEP = 1e-4


def gradient_scene(seed=0, n=5):
    rng = np.random.default_rng(seed)
    mu = np.column_stack([rng.uniform(-0.8, 0.8, n), rng.uniform(-0.8, 0.8, n), rng.uniform(4.0, 6.0, n)])
    log_scale = np.log(rng.uniform(0.15, 0.35, size=(n, 3)))
    rotation_q = rng.normal(size=(n, 4))
    color = rng.uniform(0.2, 0.7, size=(n, 3))
    logit_opacity = np.array([logit(p) for p in rng.uniform(0.3, 0.7, n)])
    mod = AdaptiveModulator.create(feature_dim=4, hidden=5, rng=rng, weight_std=0.5, output_bias=1.0)
    mod.sca.w2[:] = rng.normal(0.0, 0.5, 5)
    mod.opa.w2[:] = rng.normal(0.0, 0.5, 5)
    appearance = AppearanceTable(['view'], rng.normal(0.0, 0.5, size=(1, 3)),
                                 rng.normal(0.0, 0.05, size=(3, 3)), np.zeros(3),
                                 rng.normal(0.0, 0.02, size=(3, 3)), np.full(3, 0.02))
    return GaussianScene(mu, log_scale, rotation_q, color, logit_opacity,
                         rng.normal(size=(n, 4)), rng.normal(size=(n, 4)),
                         modulator=mod, appearance=appearance)


def scene_loss(scene, target, cfg):
    return splat_loss(render(scene, INTR, POSE, SETTINGS, image_id='view').image, target, cfg)


def numeric_gradient(scene, name, index, target, cfg):
    arr = scene.parameters()[name]
    old = arr.flat[index]
    arr.flat[index] = old + STEP
    plus = scene_loss(scene, target, cfg)
    arr.flat[index] = old - STEP
    minus = scene_loss(scene, target, cfg)
    arr.flat[index] = old
    return (plus - minus) / (2.0 * STEP)


def test_analytic_gradients_match_finite_differences():
    scene = gradient_scene()
    target = np.random.default_rng(100).uniform(0.1, 0.9, size=(32, 32, 3))
    cfg = LossConfig()
    _, grads, _ = render_with_gradients(scene, INTR, POSE, target, SETTINGS, cfg, image_id='view')
    assert set(grads) == set(scene.parameters())

    rng = np.random.default_rng(101)
    for name, grad in grads.items():
        assert grad.shape == scene.parameters()[name].shape
        indices = {int(np.argmax(np.abs(grad)))} | {int(i) for i in rng.integers(0, grad.size, 2)}
        for index in indices:
            analytic = grad.flat[index]
            numeric = numeric_gradient(scene, name, index, target, cfg)
            if max(abs(analytic), abs(numeric)) < 1e-8:
                continue
            assert abs(analytic - numeric) <= 2e-3 * max(abs(analytic), abs(numeric)) + 1e-9, \
                f"{name}[{index}]: analytic {analytic} vs numeric {numeric}"


def test_pure_l2_gradients_match_finite_differences():
    scene = gradient_scene(seed=1)
    target = np.random.default_rng(102).uniform(0.1, 0.9, size=(32, 32, 3))
    cfg = LossConfig(lambda_dssim=0.0, lambda_l2=1.0)
    _, grads, _ = render_with_gradients(scene, INTR, POSE, target, SETTINGS, cfg, image_id='view')
    for name in ('gaussians.mu', 'gaussians.log_scale', 'gaussians.logit_opacity', 'modulator.opa_w2'):
        index = int(np.argmax(np.abs(grads[name])))
        numeric = numeric_gradient(scene, name, index, target, cfg)
        assert grads[name].flat[index] == pytest.approx(numeric, rel=2e-3)


def test_target_equal_to_render_gives_zero_loss():
    scene = gradient_scene(seed=2)
    target = render(scene, INTR, POSE, SETTINGS, image_id='view').image
    loss, grads, out = render_with_gradients(scene, INTR, POSE, target, SETTINGS, image_id='view')
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.array_equal(out.image, target)
    for grad in grads.values():
        assert np.max(np.abs(grad)) < 1e-9


def test_culled_gaussian_gets_zero_color_gradient():
    scene = gradient_scene(seed=3)
    scene.mu[0] = [0.0, 0.0, -3.0]
    target = np.random.default_rng(103).uniform(0.1, 0.9, size=(32, 32, 3))
    _, grads, _ = render_with_gradients(scene, INTR, POSE, target, SETTINGS, image_id='view')
    assert np.array_equal(grads['gaussians.color'][0], np.zeros(3))
    assert np.array_equal(grads['gaussians.logit_opacity'][0], 0.0)
    assert np.any(grads['gaussians.color'][1:] != 0.0)


def test_gradients_are_deterministic():
    scene = gradient_scene(seed=4)
    target = np.random.default_rng(104).uniform(0.1, 0.9, size=(32, 32, 3))
    threaded = RenderSettings(tile_size=8, min_alpha=0.0, background=(0.3, 0.3, 0.3), workers=4)
    _, first, _ = render_with_gradients(scene, INTR, POSE, target, threaded, image_id='view')
    _, second, _ = render_with_gradients(scene, INTR, POSE, target, threaded, image_id='view')
    for name in first:
        assert np.array_equal(first[name], second[name])


def test_target_shape_must_match_camera():
    scene = gradient_scene()
    with pytest.raises(RenderError):
        render_with_gradients(scene, INTR, POSE, np.zeros((16, 16, 3)), SETTINGS)


def test_check_finite_names_parameter_and_row():
    grads = {'gaussians.color': np.zeros((4, 3)), 'gaussians.mu': np.zeros((4, 3))}
    check_finite(grads)
    grads['gaussians.mu'][2, 1] = np.nan
    with pytest.raises(NonFiniteGradientError) as info:
        check_finite(grads)
    assert info.value.parameter == 'gaussians.mu'
    assert info.value.index == 2
