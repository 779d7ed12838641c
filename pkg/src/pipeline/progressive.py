"""
Altitude-progressive refinement.

After an initial fit to the aerial views, every stage of the altitude
schedule:

    1. generates novel cameras closer to the ground
    2. renders them from the current scene (noisy views)
    3. fixes each render, conditioned on its nearest training view
    4. filters fixed views by DSSIM against that reference
    5. appends the accepted views to the training set and retrains

Metrics on the held-out ground views are recorded after the initial fit and
after every stage.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import PipelineError
from src.losses.edges import edge_weighted_l2
from src.losses.metrics import psnr, ssim
from src.losses.objectives import LossConfig
from src.renderer.rasterizer import render
from src.renderer.settings import RenderSettings
from src.scene.gaussians import GaussianScene, init_from_points
from src.trajectories.strategies import (
    PlannedCamera, TrajectoryPlan, estimate_ground_height, generate,
)
from .config import PipelineConfig
from .filtering import FilterVerdict, ViewQualityFilter
from .fixers import Fixer, IdentityFixer
from .training import TrainingView, reference_for, scene_extent, train_splats

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['stage', 'altitude_factor', 'views_generated', 'views_accepted', 'acceptance_rate',
                  'mean_dssim', 'train_views', 'ground_psnr', 'ground_ssim', 'ground_edge_l2', 'final_loss']


@dataclass
class StageView:
    """Outcome for one generated camera."""

    camera: PlannedCamera
    reference_id: str
    noisy: np.ndarray
    fixed: Optional[np.ndarray]
    verdict: FilterVerdict


@dataclass
class RefinementStage:
    """
    Record of one refinement stage; holds one verdict per generated view.
    """

    index: int
    altitude_factor: float
    plan: TrajectoryPlan
    views: List[StageView] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    metrics: Dict[str, float] = field(default_factory=dict)

    @property
    def verdicts(self) -> List[FilterVerdict]:
        return [v.verdict for v in self.views]

    @property
    def noisy_renders(self) -> List[np.ndarray]:
        return [v.noisy for v in self.views]

    @property
    def fixed_images(self) -> List[Optional[np.ndarray]]:
        return [v.fixed for v in self.views]

    @property
    def accepted_count(self) -> int:
        return sum(1 for v in self.views if v.verdict.accepted)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted_count / len(self.views) if self.views else 0.0


@dataclass
class ProgressiveResult:
    scene: GaussianScene
    stages: List[RefinementStage]
    metrics: pd.DataFrame
    views: List[TrainingView]
    initial_losses: List[float] = field(default_factory=list)


def evaluate_views(scene: GaussianScene, views: Sequence[TrainingView],
                   settings: Optional[RenderSettings] = None,
                   loss_cfg: Optional[LossConfig] = None) -> pd.DataFrame:
    """
    Per-view PSNR, SSIM and edge-weighted L2 of identity-appearance renders.
    """
    settings = settings or RenderSettings()
    loss_cfg = loss_cfg or LossConfig()
    rows = []
    for view in views:
        image = render(scene, view.intrinsics, view.pose, settings).image
        rows.append({
            'view': view.image_id,
            'psnr': psnr(image, view.image),
            'ssim': ssim(image, view.image),
            'edge_l2': edge_weighted_l2(image, view.image, loss_cfg.sobel_scales, loss_cfg.edge_floor),
        })
    return pd.DataFrame(rows, columns=['view', 'psnr', 'ssim', 'edge_l2'])


def _summary(table: pd.DataFrame) -> Dict[str, float]:
    if table.empty:
        return {'ground_psnr': np.nan, 'ground_ssim': np.nan, 'ground_edge_l2': np.nan}
    return {'ground_psnr': float(table['psnr'].mean()),
            'ground_ssim': float(table['ssim'].mean()),
            'ground_edge_l2': float(table['edge_l2'].mean())}


def _process_camera(scene: GaussianScene, camera: PlannedCamera, references: Sequence[TrainingView],
                    fixer: Fixer, view_filter: ViewQualityFilter, settings: RenderSettings) -> StageView:
    noisy = render(scene, camera.intrinsics, camera.pose, settings).image
    ref = reference_for(camera.pose, references)
    try:
        fixed = fixer(noisy, ref.image, camera.intrinsics, camera.pose, ref.pose)
    except Exception as e:
        logger.warning("Fixer failed, skipping view", extra={"camera": camera.camera_id, "error": str(e)})
        return StageView(camera, ref.image_id, noisy, None, FilterVerdict(False, 0.0, float('nan'),
                                                                          f"fixer failed: {e}"))
    if fixed.shape != ref.image.shape:
        verdict = FilterVerdict(False, 0.0, float('nan'), "reference resolution differs")
    else:
        verdict = view_filter.evaluate(fixed, ref.image)
    return StageView(camera, ref.image_id, noisy, fixed, verdict)


def run_stage(scene: GaussianScene, views: Sequence[TrainingView], plan: TrajectoryPlan,
              fixer: Fixer, view_filter: ViewQualityFilter,
              settings: Optional[RenderSettings] = None,
              workers: int = 1) -> Tuple[RefinementStage, List[TrainingView]]:
    """
    Render, fix and filter the plan's cameras.

    Args:
        scene: current scene (not modified)
        views: current training set
        plan: stage cameras
        fixer: view fixer
        view_filter: DSSIM filter
        settings: rasterizer settings
        workers: concurrent views (used only for thread-safe fixers)

    Returns:
        (stage record, training set with accepted fixed views appended)
    """
    settings = settings or RenderSettings()
    references = [v for v in views if v.source == 'aerial'] or list(views)
    stage = RefinementStage(plan.stage, plan.strategy.altitude_factor, plan)

    def work(camera: PlannedCamera) -> StageView:
        return _process_camera(scene, camera, references, fixer, view_filter, settings)

    if workers > 1 and fixer.thread_safe and len(plan.cameras) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stage.views = list(pool.map(work, plan.cameras))
    else:
        stage.views = [work(c) for c in plan.cameras]

    augmented = list(views)
    for sv in stage.views:
        if sv.verdict.accepted and sv.verdict.weight > 0:
            augmented.append(TrainingView(sv.camera.camera_id, sv.camera.intrinsics, sv.camera.pose,
                                          sv.fixed, weight=sv.verdict.weight, appearance_id=None,
                                          source='fixed', stage=plan.stage))
    logger.info("Stage views processed", extra={
        "stage": plan.stage, "generated": len(stage.views), "accepted": stage.accepted_count,
        "plan_errors": len(plan.errors)})
    return stage, augmented


def _metrics_row(stage: int, factor: float, generated: int, accepted: int, dssims: List[float],
                 train_views: int, summary: Dict[str, float], losses: List[float]) -> Dict[str, float]:
    finite = [d for d in dssims if np.isfinite(d)]
    return {
        'stage': stage,
        'altitude_factor': factor,
        'views_generated': generated,
        'views_accepted': accepted,
        'acceptance_rate': accepted / generated if generated else np.nan,
        'mean_dssim': float(np.mean(finite)) if finite else np.nan,
        'train_views': train_views,
        **summary,
        'final_loss': losses[-1] if losses else np.nan,
    }


def run_progressive(config: PipelineConfig, train_views: Sequence[TrainingView],
                    eval_views: Sequence[TrainingView] = (), points: Optional[np.ndarray] = None,
                    colors: Optional[np.ndarray] = None, fixer: Optional[Fixer] = None,
                    initial_scene: Optional[GaussianScene] = None,
                    ground_height: Optional[float] = None) -> ProgressiveResult:
    """
    Initial training followed by one refinement stage per altitude factor.

    Args:
        config: pipeline configuration
        train_views: aerial training views
        eval_views: held-out ground views for metrics
        points, colors: initialization point cloud (ignored when initial_scene is given)
        fixer: view fixer; identity when None
        initial_scene: start from this scene instead of the point cloud
        ground_height: ground plane; 5th percentile of point z when None

    Returns:
        ProgressiveResult with the final scene, stage records and a metrics table
        (row 'stage' = -1 is the initial fit)
    """
    fixer = fixer or IdentityFixer()
    views = list(train_views)
    if initial_scene is None:
        if points is None:
            raise PipelineError("run_progressive needs a point cloud or an initial scene")
        initial_scene = init_from_points(points, colors, appearance_ids=[v.image_id for v in views
                                                                          if v.appearance_id is not None],
                                         rng=np.random.default_rng(config.seed))
    cloud = np.asarray(points, dtype=np.float64).reshape(-1, 3) if points is not None else initial_scene.mu
    ground = ground_height if ground_height is not None else estimate_ground_height(cloud)
    centroid = cloud.mean(axis=0)
    extent = scene_extent(views)
    opt, rs, lc = config.optimizer, config.render, config.loss

    initial = train_splats(initial_scene, views, config.initial_iterations, opt, rs, lc,
                           seed=config.seed, extent=extent)
    scene = initial.scene
    rows = [_metrics_row(-1, 1.0, 0, 0, [], len(views), _summary(evaluate_views(scene, eval_views, rs, lc)),
                         initial.losses)]
    logger.info("Initial training done", extra={"iterations": config.initial_iterations,
                                                "ground_psnr": rows[0]['ground_psnr']})

    base_cameras = [(v.image_id, v.intrinsics, v.pose) for v in train_views]
    stages: List[RefinementStage] = []
    for k, factor in enumerate(config.schedule):
        strategy = replace(config.strategy, altitude_factor=factor, seed=config.strategy.seed + k)
        plan = generate(strategy, base_cameras, centroid, ground, stage=k)
        stage, views = run_stage(scene, views, plan, fixer, config.filter, rs, config.workers)
        retrained = train_splats(scene, views, config.stage_iterations, opt, rs, lc,
                                 seed=config.seed + k + 1, extent=extent)
        scene = retrained.scene
        stage.losses = retrained.losses
        summary = (_summary(evaluate_views(scene, eval_views, rs, lc)) if config.eval_every_stage
                   else _summary(pd.DataFrame()))
        row = _metrics_row(k, factor, len(stage.views), stage.accepted_count,
                           [v.dssim for v in stage.verdicts], len(views), summary, stage.losses)
        stage.metrics = {key: row[key] for key in ('ground_psnr', 'ground_ssim', 'ground_edge_l2',
                                                   'acceptance_rate', 'mean_dssim')}
        rows.append(row)
        stages.append(stage)
        logger.info("Stage complete", extra={"stage": k, "altitude_factor": factor,
                                             "accepted": stage.accepted_count,
                                             "ground_psnr": row['ground_psnr']})
    return ProgressiveResult(scene, stages, pd.DataFrame(rows, columns=METRIC_COLUMNS), views,
                             initial.losses)
