"""
Splat optimization against a weighted set of posed images.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from src.errors import DivergenceError, PipelineError
from src.geometry.cameras import CameraIntrinsics, CameraPose
from src.losses.objectives import LossConfig
from src.renderer.backward import render_with_gradients
from src.renderer.settings import RenderSettings
from src.scene.gaussians import GaussianScene
from .config import OptimizerConfig
from .optimizer import Adam

logger = logging.getLogger(__name__)

LOG_EVERY = 100


@dataclass
class TrainingView:
    """
    One posed training image.

    Attributes:
        image_id: unique identifier
        intrinsics, pose: camera
        image: (H, W, 3) float image in [0, 1]
        weight: sampling weight (0 = never sampled)
        appearance_id: appearance entry applied when rendering this view; None for identity
        source: 'aerial' for input images, 'fixed' for refined novel views
        stage: refinement stage that produced the view (-1 for input images)
    """

    image_id: str
    intrinsics: CameraIntrinsics
    pose: CameraPose
    image: np.ndarray
    weight: float = 1.0
    appearance_id: Optional[str] = None
    source: str = 'aerial'
    stage: int = -1

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        if self.image.shape != (self.intrinsics.height, self.intrinsics.width, 3):
            raise PipelineError(f"View '{self.image_id}' image {self.image.shape} does not match "
                                f"its {self.intrinsics.height}x{self.intrinsics.width} camera")
        if self.weight < 0 or not np.isfinite(self.weight):
            raise PipelineError(f"View '{self.image_id}' has invalid weight {self.weight}")


@dataclass
class TrainingResult:
    scene: GaussianScene
    losses: List[float] = field(default_factory=list)
    pruned: int = 0


def scene_extent(views: Sequence[TrainingView]) -> float:
    """Radius of the camera centers around their mean (at least 1)."""
    centers = np.array([v.pose.center for v in views])
    radius = float(np.linalg.norm(centers - centers.mean(axis=0), axis=1).max()) if len(views) else 0.0
    return max(1.1 * radius, 1.0)


def train_splats(scene: GaussianScene, views: Sequence[TrainingView], iterations: int,
                 optimizer_cfg: Optional[OptimizerConfig] = None,
                 render_settings: Optional[RenderSettings] = None,
                 loss_cfg: Optional[LossConfig] = None, seed: int = 0,
                 extent: Optional[float] = None) -> TrainingResult:
    """
    Optimize a copy of the scene with Adam, sampling one view per step
    proportionally to the view weights.

    Args:
        scene: starting scene (left untouched)
        views: weighted training views
        iterations: optimizer steps
        optimizer_cfg: step sizes and pruning policy
        render_settings: rasterizer settings
        loss_cfg: loss weights
        seed: view sampling seed
        extent: position step-size scale; defaults to the camera extent

    Returns:
        TrainingResult with the optimized scene and the per-step loss curve

    Raises:
        PipelineError: no view has a positive weight
        DivergenceError: the loss became non-finite
    """
    if iterations < 0:
        raise PipelineError(f"Iteration count must be >= 0, got {iterations}")
    optimizer_cfg = optimizer_cfg or OptimizerConfig()
    render_settings = render_settings or RenderSettings()
    loss_cfg = loss_cfg or LossConfig()
    trained = scene.copy()
    result = TrainingResult(trained)
    if iterations == 0:
        return result

    weights = np.array([v.weight for v in views], dtype=np.float64)
    if weights.size == 0 or weights.sum() <= 0:
        raise PipelineError("Training needs at least one view with positive weight")
    probs = weights / weights.sum()
    rng = np.random.default_rng(seed)
    position_scale = extent if extent is not None else scene_extent(views)

    def step_size(name: str) -> float:
        lr = optimizer_cfg.learning_rate(name)
        return lr * position_scale if name == 'gaussians.mu' else lr

    adam = Adam(step_size, optimizer_cfg.beta1, optimizer_cfg.beta2, optimizer_cfg.eps)
    for it in range(1, iterations + 1):
        view = views[int(rng.choice(len(views), p=probs))]
        loss, grads, _ = render_with_gradients(trained, view.intrinsics, view.pose, view.image,
                                               render_settings, loss_cfg, view.appearance_id)
        if not np.isfinite(loss):
            raise DivergenceError(it, loss)
        result.losses.append(loss)
        adam.step(trained.parameters(), grads)
        trained.normalize_quaternions()
        trained.clamp_colors()

        if optimizer_cfg.prune_interval and it % optimizer_cfg.prune_interval == 0:
            keep = trained.prune(optimizer_cfg.prune_threshold)
            adam.prune(keep)
            result.pruned += int((~keep).sum())
        if it % LOG_EVERY == 0:
            logger.info("Training progress", extra={"iteration": it, "loss": loss,
                                                    "gaussians": len(trained)})
    return result


def _rotation_angle(a: np.ndarray, b: np.ndarray) -> float:
    cos = (np.trace(a.T @ b) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def reference_scores(pose: CameraPose, views: Sequence[TrainingView]) -> np.ndarray:
    """
    Pose-distance score per view: rotation angle and center distance, each
    divided by its median over the set (a zero median counts as 1).
    """
    angles = np.array([_rotation_angle(pose.rotation, v.pose.rotation) for v in views])
    dists = np.array([np.linalg.norm(pose.center - v.pose.center) for v in views])
    angle_norm = np.median(angles) or 1.0
    dist_norm = np.median(dists) or 1.0
    return angles / angle_norm + dists / dist_norm


def reference_for(pose: CameraPose, views: Sequence[TrainingView]) -> TrainingView:
    """
    Training view closest to a novel pose; ties go to the earliest view.

    Raises:
        PipelineError: empty view set
    """
    if not views:
        raise PipelineError("Reference selection needs at least one training view")
    return views[int(np.argmin(reference_scores(pose, views)))]
