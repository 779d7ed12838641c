"""
Projection of 3D Gaussians to image-space splats.

Every Gaussian is transformed into the camera frame, its mean projected with
the pinhole model and its covariance pushed through the local affine
approximation of the projection:

    cov2d = J W Sigma_eff W^T J^T + eps I
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.errors import RenderError
from src.geometry.cameras import CameraIntrinsics, CameraPose
from src.geometry.rotations import quaternion_to_rotation
from src.scene.gaussians import GaussianPrimitive, GaussianScene
from src.scene.modulator import sigmoid
from .settings import ProjectedSplat, RenderSettings

logger = logging.getLogger(__name__)


@dataclass
class _Projected:
    t: np.ndarray
    jacobian: np.ndarray
    mean2d: np.ndarray
    cov2d: np.ndarray
    conic: np.ndarray
    radius: np.ndarray
    visible: np.ndarray


def _project_core(mu: np.ndarray, cov3d: np.ndarray, opacity: np.ndarray,
                  intr: CameraIntrinsics, pose: CameraPose, settings: RenderSettings) -> _Projected:
    n = mu.shape[0]
    t = pose.to_camera(mu)
    x, y, z = t[:, 0], t[:, 1], t[:, 2]
    in_depth = (z > settings.near) & (z < settings.far)
    zs = np.where(in_depth, z, 1.0)

    mean2d = np.stack([intr.fx * x / zs + intr.cx, intr.fy * y / zs + intr.cy], axis=1)
    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = intr.fx / zs
    jac[:, 0, 2] = -intr.fx * x / zs ** 2
    jac[:, 1, 1] = intr.fy / zs
    jac[:, 1, 2] = -intr.fy * y / zs ** 2
    tm = jac @ pose.world_to_camera
    cov2d = tm @ cov3d @ np.swapaxes(tm, 1, 2) + settings.low_pass * np.eye(2)

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    ok = in_depth & np.isfinite(det) & (det > 0)
    safe_det = np.where(ok, det, 1.0)
    conic = np.stack([c / safe_det, -b / safe_det, a / safe_det], axis=1)
    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    lam_max = np.where(ok, lam_max, 0.0)

    # 3-sigma box against the pixel-center range
    r3 = 3.0 * np.sqrt(lam_max)
    u, v = mean2d[:, 0], mean2d[:, 1]
    on_image = (u + r3 >= 0) & (u - r3 <= intr.width - 1) & (v + r3 >= 0) & (v - r3 <= intr.height - 1)
    visible = ok & on_image

    # farthest offset at which the splat can still reach min_alpha
    if settings.min_alpha <= 0:
        radius = np.full(n, np.inf)
    else:
        ratio = np.maximum(opacity, settings.min_alpha) / settings.min_alpha
        radius = np.sqrt(2.0 * np.log(ratio) * lam_max)
    return _Projected(t, jac, mean2d, cov2d, conic, radius, visible)


@dataclass
class ProjectionBatch:
    """
    All Gaussians of a scene projected for one camera, plus the intermediate
    values the backward pass reuses.
    """

    visible: np.ndarray
    mean2d: np.ndarray
    cov2d: np.ndarray
    conic: np.ndarray
    depth: np.ndarray
    opacity: np.ndarray
    color: np.ndarray
    radius: np.ndarray
    t: np.ndarray
    jacobian: np.ndarray
    world_to_camera: np.ndarray
    cov3d: np.ndarray
    cov3d_eff: np.ndarray
    rotation: np.ndarray
    scales: np.ndarray
    q_unit: np.ndarray
    q_norm: np.ndarray
    offsets: np.ndarray
    distances: np.ndarray
    gate_sca: np.ndarray
    gate_opa: np.ndarray
    base_opacity: np.ndarray
    gate_cache: tuple

    def __len__(self) -> int:
        return self.visible.shape[0]

    def splat(self, index: int) -> Optional[ProjectedSplat]:
        if not self.visible[index]:
            return None
        return ProjectedSplat(int(index), self.mean2d[index].copy(), self.cov2d[index].copy(),
                              float(self.depth[index]), self.color[index].copy(),
                              float(self.opacity[index]))

    def visible_splats(self) -> List[ProjectedSplat]:
        return [self.splat(i) for i in np.flatnonzero(self.visible)]


def project_scene(scene: GaussianScene, intr: CameraIntrinsics, pose: CameraPose,
                  settings: RenderSettings) -> ProjectionBatch:
    """
    Modulate and project every Gaussian of the scene for one camera.

    Raises:
        RenderError: if the scene is empty
    """
    if len(scene) == 0:
        raise RenderError("Cannot render an empty scene")
    offsets = scene.mu - pose.center
    distances = np.linalg.norm(offsets, axis=1)
    g_sca, g_opa, gate_cache = scene.modulator.gates(scene.f_sca, scene.f_opa, distances)

    q_norm = np.linalg.norm(scene.rotation_q, axis=1)
    q_unit = scene.rotation_q / q_norm[:, None]
    rot = quaternion_to_rotation(q_unit)
    scales = np.exp(scene.log_scale)
    m = rot * scales[:, None, :]
    cov3d = m @ np.swapaxes(m, 1, 2)
    cov3d_eff = (g_sca ** 2)[:, None, None] * cov3d
    base = sigmoid(scene.logit_opacity)
    opacity = g_opa * base

    core = _project_core(scene.mu, cov3d_eff, opacity, intr, pose, settings)
    logger.debug("Projected scene", extra={"gaussians": len(scene), "visible": int(core.visible.sum())})
    return ProjectionBatch(
        visible=core.visible, mean2d=core.mean2d, cov2d=core.cov2d, conic=core.conic,
        depth=core.t[:, 2].copy(), opacity=opacity, color=scene.color.copy(), radius=core.radius,
        t=core.t, jacobian=core.jacobian, world_to_camera=pose.world_to_camera,
        cov3d=cov3d, cov3d_eff=cov3d_eff, rotation=rot, scales=scales, q_unit=q_unit, q_norm=q_norm,
        offsets=offsets, distances=distances, gate_sca=g_sca, gate_opa=g_opa, base_opacity=base,
        gate_cache=gate_cache,
    )


def project_gaussian(g: GaussianPrimitive, effective_opacity: float, effective_scale: np.ndarray,
                     intr: CameraIntrinsics, pose: CameraPose,
                     settings: Optional[RenderSettings] = None, index: int = 0) -> Optional[ProjectedSplat]:
    """
    Project one primitive given its modulated opacity and scale.

    Returns:
        ProjectedSplat, or None when the Gaussian is culled
    """
    settings = settings or RenderSettings()
    rot = quaternion_to_rotation(g.rotation_q)
    m = rot * np.asarray(effective_scale, dtype=np.float64)[None, :]
    cov3d = (m @ m.T)[None]
    opacity = np.array([float(effective_opacity)])
    core = _project_core(g.mu[None], cov3d, opacity, intr, pose, settings)
    if not core.visible[0]:
        return None
    return ProjectedSplat(index, core.mean2d[0], core.cov2d[0], float(core.t[0, 2]),
                          np.asarray(g.color, dtype=np.float64).copy(), float(effective_opacity))
