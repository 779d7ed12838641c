"""
Reverse-mode gradients of the splat training loss.

The chain runs loss -> appearance transform -> compositing -> projection ->
modulation -> scene parameters. Every step is written out by hand and checked
against central finite differences in the tests.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import NonFiniteGradientError, RenderError
from src.geometry.cameras import CameraIntrinsics, CameraPose
from src.geometry.rotations import quaternion_rotation_jacobian
from src.losses.objectives import LossConfig, splat_loss_and_gradient
from src.scene.gaussians import GaussianScene
from .projection import ProjectionBatch, project_scene
from .rasterizer import TileState, _map_tiles, rasterize
from .settings import RenderOutput, RenderSettings

logger = logging.getLogger(__name__)


def _tile_backward(batch: ProjectionBatch, state: TileState, d_pixels: np.ndarray,
                   background: np.ndarray):
    order = state.tile.order
    g = d_pixels.reshape(-1, 3)
    colors = batch.color[order]
    d_color = state.weights.T @ g

    gc = g @ colors.T
    wg = state.weights * gc
    behind = np.cumsum(wg[:, ::-1], axis=1)[:, ::-1] - wg
    behind += (state.final_t * (g @ background))[:, None]
    d_alpha = state.transmittance * gc - behind / (1.0 - state.alpha)
    d_raw = np.where(state.grad_mask, d_alpha, 0.0)

    d_opacity = (d_raw * state.gauss).sum(axis=0)
    d_power = d_raw * state.raw
    a, b, c = batch.conic[order, 0], batch.conic[order, 1], batch.conic[order, 2]
    dx, dy = state.dx, state.dy
    d_mean = np.stack([(d_power * (a * dx + b * dy)).sum(axis=0),
                       (d_power * (b * dx + c * dy)).sum(axis=0)], axis=1)
    d_conic = np.stack([(d_power * (-0.5 * dx * dx)).sum(axis=0),
                        (d_power * (-dx * dy)).sum(axis=0),
                        (d_power * (-0.5 * dy * dy)).sum(axis=0)], axis=1)
    return order, d_color, d_opacity, d_mean, d_conic


def rasterize_backward(batch: ProjectionBatch, states: List[TileState], d_image: np.ndarray,
                       settings: RenderSettings):
    """
    Gradients of the loss w.r.t. per-splat color, opacity, mean2d and conic.

    Tiles are processed independently and their partial sums reduced in tile order.
    """
    n = len(batch)
    background = settings.background_array

    def run(state: TileState):
        t = state.tile
        return _tile_backward(batch, state, d_image[t.y0:t.y1, t.x0:t.x1], background)

    partials = _map_tiles(run, states, settings.workers)
    d_color = np.zeros((n, 3))
    d_opacity = np.zeros(n)
    d_mean = np.zeros((n, 2))
    d_conic = np.zeros((n, 3))
    for order, dc, do, dm, dq in partials:
        np.add.at(d_color, order, dc)
        np.add.at(d_opacity, order, do)
        np.add.at(d_mean, order, dm)
        np.add.at(d_conic, order, dq)
    return d_color, d_opacity, d_mean, d_conic


def projection_backward(scene: GaussianScene, batch: ProjectionBatch, intr: CameraIntrinsics,
                        d_color: np.ndarray, d_opacity: np.ndarray, d_mean: np.ndarray,
                        d_conic: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Push splat-level gradients back to the scene's Gaussian and modulator parameters.
    """
    n = len(scene)
    vis = np.flatnonzero(batch.visible)
    fx, fy = intr.fx, intr.fy
    w2c = batch.world_to_camera

    d_mu = np.zeros((n, 3))
    d_log_scale = np.zeros((n, 3))
    d_q = np.zeros((n, 4))
    d_gate_sca = np.zeros(n)

    if vis.size:
        conic = batch.conic[vis]
        q_mat = np.empty((vis.size, 2, 2))
        q_mat[:, 0, 0] = conic[:, 0]
        q_mat[:, 0, 1] = q_mat[:, 1, 0] = conic[:, 1]
        q_mat[:, 1, 1] = conic[:, 2]
        g_q = np.empty_like(q_mat)
        g_q[:, 0, 0] = d_conic[vis, 0]
        g_q[:, 0, 1] = g_q[:, 1, 0] = 0.5 * d_conic[vis, 1]
        g_q[:, 1, 1] = d_conic[vis, 2]
        g_cov2d = -q_mat @ g_q @ q_mat

        jac = batch.jacobian[vis]
        tm = jac @ w2c
        cov_eff = batch.cov3d_eff[vis]
        g_tm = 2.0 * g_cov2d @ tm @ cov_eff
        g_cov_eff = np.swapaxes(tm, 1, 2) @ g_cov2d @ tm
        g_jac = g_tm @ w2c.T

        x, y, z = batch.t[vis, 0], batch.t[vis, 1], batch.t[vis, 2]
        du, dv = d_mean[vis, 0], d_mean[vis, 1]
        dt = np.empty((vis.size, 3))
        dt[:, 0] = g_jac[:, 0, 2] * (-fx / z ** 2) + du * fx / z
        dt[:, 1] = g_jac[:, 1, 2] * (-fy / z ** 2) + dv * fy / z
        dt[:, 2] = (g_jac[:, 0, 0] * (-fx / z ** 2) + g_jac[:, 1, 1] * (-fy / z ** 2)
                    + g_jac[:, 0, 2] * (2.0 * fx * x / z ** 3) + g_jac[:, 1, 2] * (2.0 * fy * y / z ** 3)
                    - du * fx * x / z ** 2 - dv * fy * y / z ** 2)
        d_mu[vis] = dt @ w2c

        g_sca = batch.gate_sca[vis]
        cov3d = batch.cov3d[vis]
        d_gate_sca[vis] = 2.0 * g_sca * np.einsum('nij,nij->n', g_cov_eff, cov3d)
        g_cov = (g_sca ** 2)[:, None, None] * g_cov_eff

        rot = batch.rotation[vis]
        scales = batch.scales[vis]
        m = rot * scales[:, None, :]
        g_m = 2.0 * g_cov @ m
        d_s = (g_m * rot).sum(axis=1)
        d_log_scale[vis] = d_s * scales
        g_rot = g_m * scales[:, None, :]
        q_unit = batch.q_unit[vis]
        d_q_unit = np.einsum('nkij,nij->nk', quaternion_rotation_jacobian(q_unit), g_rot)
        radial = (q_unit * d_q_unit).sum(axis=1, keepdims=True)
        d_q[vis] = (d_q_unit - q_unit * radial) / batch.q_norm[vis, None]

    base = batch.base_opacity
    d_gate_opa = d_opacity * base
    d_logit = d_opacity * batch.gate_opa * base * (1.0 - base)

    d_f_sca, d_f_opa, d_dist, net_grads = scene.modulator.gates_backward(
        batch.gate_cache, d_gate_sca, d_gate_opa)
    safe = np.where(batch.distances > 0, batch.distances, 1.0)
    direction = np.where((batch.distances > 0)[:, None], batch.offsets / safe[:, None], 0.0)
    d_mu += d_dist[:, None] * direction

    grads = {
        'gaussians.mu': d_mu,
        'gaussians.log_scale': d_log_scale,
        'gaussians.rotation_q': d_q,
        'gaussians.color': d_color,
        'gaussians.logit_opacity': d_logit,
        'gaussians.f_sca': d_f_sca,
        'gaussians.f_opa': d_f_opa,
    }
    grads.update(net_grads)
    return grads


def check_finite(grads: Dict[str, np.ndarray]) -> None:
    """
    Raises:
        NonFiniteGradientError: naming the first parameter (and Gaussian row) that is not finite
    """
    for name, grad in grads.items():
        bad = ~np.isfinite(grad)
        if bad.any():
            index = None
            if name.startswith('gaussians.'):
                index = int(np.flatnonzero(bad.reshape(grad.shape[0], -1).any(axis=1))[0])
            raise NonFiniteGradientError(name, index)


def render_with_gradients(scene: GaussianScene, intr: CameraIntrinsics, pose: CameraPose,
                          target: np.ndarray, settings: Optional[RenderSettings] = None,
                          loss_cfg: Optional[LossConfig] = None,
                          image_id: Optional[str] = None) -> Tuple[float, Dict[str, np.ndarray], RenderOutput]:
    """
    Render, evaluate the training loss against target and back-propagate.

    Args:
        scene: GaussianScene to differentiate
        intr, pose: camera
        target: (H, W, 3) ground-truth image
        settings: rasterizer settings
        loss_cfg: loss weights
        image_id: appearance entry to apply; None for identity

    Returns:
        (loss, gradients keyed like scene.parameters(), RenderOutput)

    Raises:
        RenderError: target resolution differs from the camera
        NonFiniteGradientError: a gradient entry is NaN or infinite
    """
    settings = settings or RenderSettings()
    loss_cfg = loss_cfg or LossConfig()
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (intr.height, intr.width, 3):
        raise RenderError(f"Target {target.shape} does not match camera "
                          f"{intr.height}x{intr.width}x3")

    batch = project_scene(scene, intr, pose, settings)
    raw_image, alpha, depth, states = rasterize(batch, intr.width, intr.height, settings, keep_state=True)
    image, app_cache = scene.appearance.apply(raw_image, image_id)
    loss, d_image = splat_loss_and_gradient(image, target, loss_cfg)

    d_raw_image, app_grads = scene.appearance.backward(app_cache, d_image)
    d_color, d_opacity, d_mean, d_conic = rasterize_backward(batch, states, d_raw_image, settings)
    grads = projection_backward(scene, batch, intr, d_color, d_opacity, d_mean, d_conic)
    grads.update(app_grads)
    check_finite(grads)
    return loss, grads, RenderOutput(image=image, alpha=alpha, depth=depth)
