"""
Synthetic aerial-to-ground harness.

A hidden scene of random opaque Gaussians is viewed by a ring of aerial
cameras high above it and a handful of ground-level cameras. The aerial views
train the model; the ground views are only used for evaluation.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
import pandas as pd

from src.errors import PipelineError
from src.geometry.cameras import CameraIntrinsics, project_points
from src.geometry.rotations import random_rotation, rotation_to_quaternion
from src.renderer.rasterizer import render
from src.renderer.settings import RenderSettings
from src.scene.appearance import AppearanceTable
from src.scene.gaussians import GaussianScene, init_from_points, logit
from src.scene.modulator import AdaptiveModulator
from src.trajectories.strategies import look_at
from .config import PipelineConfig
from .fixers import make_fixer
from .progressive import ProgressiveResult, evaluate_views, run_progressive
from .training import TrainingView, scene_extent, train_splats

logger = logging.getLogger(__name__)

IMAGE_SIZE = 64
FOCAL = 56.0
AERIAL_COUNT = 30
GROUND_COUNT = 10
AERIAL_HEIGHT = 20.0
GROUND_HEIGHT = 0.5
MIN_VISIBLE = 0.8
POSE_ATTEMPTS = 1000
FEATURE_DIM = 8
HIDDEN = 8


@dataclass
class SyntheticScene:
    """Hidden ground-truth scene plus rendered aerial and ground views."""

    gt_scene: GaussianScene
    intrinsics: CameraIntrinsics
    aerial: List[TrainingView]
    ground: List[TrainingView]
    points: np.ndarray
    colors: np.ndarray


def synthetic_intrinsics() -> CameraIntrinsics:
    c = (IMAGE_SIZE - 1) / 2.0
    return CameraIntrinsics(FOCAL, FOCAL, c, c, IMAGE_SIZE, IMAGE_SIZE)


def _random_scene(rng: np.random.Generator) -> GaussianScene:
    n = int(rng.integers(20, 61))
    mu = np.column_stack([rng.uniform(-5, 5, n), rng.uniform(-5, 5, n), rng.uniform(0, 3, n)])
    rotation_q = np.array([rotation_to_quaternion(random_rotation(rng)) for _ in range(n)])
    log_scale = np.log(rng.uniform(0.25, 0.9, size=(n, 3)))
    # two-tone colors per Gaussian so neighbouring primitives differ
    base = rng.uniform(0.1, 0.9, size=(n, 3))
    color = np.clip(base + rng.choice([-0.1, 0.1], size=(n, 1)), 0.0, 1.0)
    logit_opacity = np.array([logit(p) for p in rng.uniform(0.85, 0.98, n)])
    zeros = np.zeros((n, FEATURE_DIM))
    return GaussianScene(mu, log_scale, rotation_q, color, logit_opacity, zeros, zeros.copy(),
                         modulator=AdaptiveModulator.passthrough(FEATURE_DIM, HIDDEN),
                         appearance=AppearanceTable.create(dim=4))


def _visible_fraction(intr: CameraIntrinsics, pose, centers: np.ndarray) -> float:
    uv, z = project_points(intr, pose, centers)
    inside = (z > 0) & (uv[:, 0] >= -0.5) & (uv[:, 0] <= intr.width - 0.5) \
        & (uv[:, 1] >= -0.5) & (uv[:, 1] <= intr.height - 0.5)
    return float(inside.mean())


def _aerial_poses(rng: np.random.Generator, intr: CameraIntrinsics, centers: np.ndarray) -> list:
    target = np.array([0.0, 0.0, 1.5])
    poses = []
    for k in range(AERIAL_COUNT):
        azimuth = 2.0 * np.pi * k / AERIAL_COUNT
        for _ in range(POSE_ATTEMPTS):
            pitch = np.deg2rad(rng.uniform(45.0, 70.0))
            jitter = np.append(rng.uniform(-1.0, 1.0, 2), 0.0)
            radius = (AERIAL_HEIGHT - target[2]) / np.tan(pitch)
            position = np.array([radius * np.cos(azimuth), radius * np.sin(azimuth), AERIAL_HEIGHT])
            candidate = look_at(position, target + jitter)
            if _visible_fraction(intr, candidate, centers) >= MIN_VISIBLE:
                poses.append(candidate)
                break
        else:
            raise PipelineError(f"Aerial camera {k} sees less than {MIN_VISIBLE:.0%} of the scene "
                                f"after {POSE_ATTEMPTS} samples")
    return poses


def _ground_poses(rng: np.random.Generator) -> list:
    poses = []
    for k in range(GROUND_COUNT):
        azimuth = 2.0 * np.pi * (k + rng.uniform(-0.2, 0.2)) / GROUND_COUNT
        radius = rng.uniform(8.0, 10.0)
        position = np.array([radius * np.cos(azimuth), radius * np.sin(azimuth), GROUND_HEIGHT])
        poses.append(look_at(position, np.array([0.0, 0.0, GROUND_HEIGHT])))
    return poses


def _init_cloud(rng: np.random.Generator, scene: GaussianScene, per_gaussian: int = 3):
    """Noisy samples of every Gaussian, standing in for a structure-from-motion cloud."""
    points, colors = [], []
    for i in range(len(scene)):
        g = scene.primitive(i)
        chol = np.linalg.cholesky(g.covariance)
        points.append(g.mu + rng.normal(size=(per_gaussian, 3)) @ chol.T)
        colors.append(np.clip(g.color + rng.normal(0.0, 0.05, size=(per_gaussian, 3)), 0.0, 1.0))
    return np.vstack(points), np.vstack(colors)


def synthetic_scene_generator(seed: int = 0, settings: Optional[RenderSettings] = None,
                              intrinsics: Optional[CameraIntrinsics] = None) -> SyntheticScene:
    """
    Random hidden scene with 30 aerial and 10 ground views rendered from it.

    Every aerial camera sees at least 80% of the Gaussian centers; camera
    placements are resampled until they do.

    Raises:
        PipelineError: no placement of some aerial camera passes the check
    """
    rng = np.random.default_rng(seed)
    settings = settings or RenderSettings()
    intr = synthetic_intrinsics() if intrinsics is None else intrinsics
    gt = _random_scene(rng)
    aerial_poses = _aerial_poses(rng, intr, gt.mu)
    ground_poses = _ground_poses(rng)

    aerial = [TrainingView(f"aerial_{k:03d}", intr, pose, render(gt, intr, pose, settings).image,
                           appearance_id=f"aerial_{k:03d}")
              for k, pose in enumerate(aerial_poses)]
    ground = [TrainingView(f"ground_{k:03d}", intr, pose, render(gt, intr, pose, settings).image,
                           source='ground')
              for k, pose in enumerate(ground_poses)]
    points, colors = _init_cloud(rng, gt)
    logger.info("Generated synthetic scene", extra={"seed": seed, "gaussians": len(gt), "points": len(points)})
    return SyntheticScene(gt, intr, aerial, ground, points, colors)


@dataclass
class SyntheticExperiment:
    baseline_views: pd.DataFrame
    progressive: ProgressiveResult
    baseline_psnr: float
    final_psnr: float

    @property
    def improvement(self) -> float:
        return self.final_psnr - self.baseline_psnr


def run_synthetic_experiment(seed: int = 0, config: Optional[PipelineConfig] = None,
                             fixer_name: str = 'oracle') -> SyntheticExperiment:
    """
    Aerial-only baseline against progressive refinement at equal optimizer steps.

    Args:
        seed: harness and pipeline seed
        config: pipeline configuration (seed is overridden)
        fixer_name: 'oracle' or 'identity'
    """
    config = replace(config or PipelineConfig(), seed=seed)
    data = synthetic_scene_generator(seed, config.render)
    fixer = make_fixer(fixer_name, gt_scene=data.gt_scene, settings=config.render)

    start = init_from_points(data.points, data.colors, feature_dim=FEATURE_DIM,
                             appearance_ids=[v.image_id for v in data.aerial],
                             rng=np.random.default_rng(seed))
    total = config.initial_iterations + len(config.schedule) * config.stage_iterations
    baseline = train_splats(start, data.aerial, total, config.optimizer, config.render, config.loss,
                            seed=seed, extent=scene_extent(data.aerial))
    baseline_views = evaluate_views(baseline.scene, data.ground, config.render, config.loss)

    progressive = run_progressive(config, data.aerial, data.ground, data.points, data.colors,
                                  fixer=fixer, initial_scene=start)
    final_psnr = float(progressive.metrics['ground_psnr'].iloc[-1])
    experiment = SyntheticExperiment(baseline_views, progressive,
                                     float(baseline_views['psnr'].mean()), final_psnr)
    logger.info("Synthetic experiment finished", extra={"seed": seed,
                                                        "baseline_psnr": experiment.baseline_psnr,
                                                        "final_psnr": final_psnr})
    return experiment
