"""
Command line interface.

    altisplat train       fit a scene to the aerial split of a dataset
    altisplat render      render a checkpoint from planned or dataset cameras
    altisplat trajectory  write the novel cameras of one stage
    altisplat refine      altitude-progressive refinement
    altisplat eval        PSNR / SSIM / edge-L2 tables
    altisplat mask-debug  draw epipolar attention masks
    altisplat synthetic   write a synthetic aerial/ground dataset

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import logging
import shlex
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import click
import numpy as np
import pandas as pd
import yaml

from src.attention.masks import TokenGrid, build_epipolar_mask
from src.data.checkpoint import load_checkpoint, save_checkpoint
from src.data.colmap import ColmapImage
from src.data.dataset import EVAL_SPLIT, TRAIN_SPLIT, DatasetBundle, load_dataset, write_dataset
from src.data.images import read_image, write_image
from src.data.plans import read_plan, write_plan
from src.data.storage import StageRecordStorage
from src.errors import AltisplatError, PipelineError
from src.losses.edges import edge_weighted_l2
from src.losses.metrics import psnr, ssim
from src.pipeline.config import (
    FIXER_NAMES, FixerConfig, PipelineConfig, load_pipeline_config, parse_schedule, pipeline_config_to_dict,
)
from src.pipeline.filtering import FILTER_ACTIONS, MAX_TAU
from src.pipeline.fixers import make_fixer
from src.pipeline.progressive import evaluate_views, run_progressive
from src.pipeline.synthetic import synthetic_scene_generator
from src.pipeline.training import TrainingView, scene_extent, train_splats
from src.renderer.rasterizer import render
from src.scene.gaussians import init_from_points
from src.trajectories.strategies import StrategyKind, TrajectoryStrategy, estimate_ground_height, generate
from src.visualization.charts import generate_report, write_report_html
from src.visualization.masks import write_mask_rows
from .logging_config import LOG_FORMATS, configure_logging

logger = logging.getLogger(__name__)

STRATEGIES = [k.value for k in StrategyKind]
DIR = click.Path(exists=True, file_okay=False, path_type=Path)
FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUT_DIR = click.Path(file_okay=False, path_type=Path)
IMAGE_SUFFIXES = ('.png', '.ppm', '.pgm', '.jpg', '.jpeg')


def _config(config_path: Optional[Path]) -> PipelineConfig:
    return load_pipeline_config(str(config_path)) if config_path else PipelineConfig()


def dataset_views(bundle: DatasetBundle, split: str) -> List[TrainingView]:
    """
    Training views of one split. Aerial views get their own appearance entry;
    ground views render with the identity appearance.
    """
    aerial = split == TRAIN_SPLIT
    views = []
    for img in bundle.split(split):
        views.append(TrainingView(img.name, bundle.intrinsics(img), img.pose, bundle.load_pixels(img),
                                  appearance_id=img.name if aerial else None,
                                  source='aerial' if aerial else 'ground'))
    return views


def _train_views(bundle: DatasetBundle) -> List[TrainingView]:
    views = dataset_views(bundle, TRAIN_SPLIT)
    if not views:
        raise PipelineError(f"Dataset {bundle.root} has no '{TRAIN_SPLIT}' images")
    return views


def _require_points(bundle: DatasetBundle) -> np.ndarray:
    if bundle.points is None or len(bundle.points) == 0:
        raise PipelineError(f"Dataset {bundle.root} has no point cloud (points.ply or points3D.txt)")
    return bundle.points


def _echo_table(table: pd.DataFrame) -> None:
    click.echo(table.to_string(index=False) if len(table) else "(no rows)")


@click.group(context_settings={'help_option_names': ['-h', '--help']})
@click.option('--log-level', default=None, help="Log level (default: $ALTISPLAT_LOG_LEVEL or INFO).")
@click.option('--log-format', type=click.Choice(LOG_FORMATS), default=None,
              help="Log format (default: $ALTISPLAT_LOG_FORMAT or text).")
def cli(log_level: Optional[str], log_format: Optional[str]) -> None:
    """Altitude-progressive Gaussian splatting from aerial to ground views."""
    try:
        configure_logging(log_level, log_format)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="'--log-level' / '--log-format'") from e


@cli.command()
@click.option('--data', 'data_dir', required=True, type=DIR, help="Dataset directory.")
@click.option('--config', 'config_path', type=FILE, help="Pipeline YAML config.")
@click.option('--iterations', type=click.IntRange(min=0), help="Optimizer steps (default: config initial_iterations).")
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', 'out_dir', required=True, type=OUT_DIR)
def train(data_dir: Path, config_path: Optional[Path], iterations: Optional[int], seed: int, out_dir: Path) -> None:
    """Fit a scene to the aerial views of a dataset."""
    cfg = _config(config_path)
    bundle = load_dataset(data_dir)
    views = _train_views(bundle)
    points = _require_points(bundle)
    scene = init_from_points(points, bundle.colors, appearance_ids=[v.image_id for v in views],
                             rng=np.random.default_rng(seed))
    steps = cfg.initial_iterations if iterations is None else iterations
    result = train_splats(scene, views, steps, cfg.optimizer, cfg.render, cfg.loss, seed=seed,
                          extent=scene_extent(views))

    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.scene, out_dir / 'scene.pdgs')
    pd.DataFrame({'iteration': np.arange(len(result.losses)), 'loss': result.losses}) \
        .to_csv(out_dir / 'losses.csv', index=False)
    ground = dataset_views(bundle, EVAL_SPLIT)
    if ground:
        table = evaluate_views(result.scene, ground, cfg.render, cfg.loss)
        table.to_csv(out_dir / 'eval.csv', index=False)
        _echo_table(table)
    click.echo(f"Trained {len(result.scene)} Gaussians for {steps} iterations -> {out_dir / 'scene.pdgs'}")


@cli.command('render')
@click.option('--scene', 'scene_path', required=True, type=FILE, help="Scene checkpoint.")
@click.option('--plan', 'plan_path', type=FILE, help="Trajectory plan with the cameras to render.")
@click.option('--data', 'data_dir', type=DIR, help="Dataset whose cameras to render (when no plan is given).")
@click.option('--split', type=click.Choice([TRAIN_SPLIT, EVAL_SPLIT]), default=EVAL_SPLIT, show_default=True)
@click.option('--config', 'config_path', type=FILE, help="Pipeline YAML config (render section).")
@click.option('--out', 'out_dir', required=True, type=OUT_DIR)
def render_command(scene_path: Path, plan_path: Optional[Path], data_dir: Optional[Path], split: str,
                   config_path: Optional[Path], out_dir: Path) -> None:
    """Render a checkpoint to PNG images."""
    if (plan_path is None) == (data_dir is None):
        raise click.UsageError("Give exactly one of --plan or --data")
    settings = _config(config_path).render
    scene = load_checkpoint(scene_path)
    if plan_path is not None:
        cameras = [(c.camera_id, c.intrinsics, c.pose) for c in read_plan(plan_path)]
    else:
        bundle = load_dataset(data_dir)
        cameras = [(Path(img.name).stem, bundle.intrinsics(img), img.pose) for img in bundle.split(split)]
    for camera_id, intr, pose in cameras:
        write_image(out_dir / f"{camera_id}.png", render(scene, intr, pose, settings).image)
    click.echo(f"Rendered {len(cameras)} views -> {out_dir}")


@cli.command()
@click.option('--data', 'data_dir', required=True, type=DIR, help="Dataset directory.")
@click.option('--strategy', type=click.Choice(STRATEGIES), default=StrategyKind.SCALED.value, show_default=True)
@click.option('--factor', type=click.FloatRange(min=0.0, max=1.0, min_open=True), default=0.9, show_default=True,
              help="Altitude factor of the generated cameras.")
@click.option('--stage', type=click.IntRange(min=0), default=0, show_default=True)
@click.option('--samples', type=click.IntRange(min=1), help="Camera count for the elliptical strategy.")
@click.option('--yaw-std', type=click.FloatRange(min=0.0), default=2.0, show_default=True)
@click.option('--pitch-std', type=click.FloatRange(min=0.0), default=2.0, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False, path_type=Path))
def trajectory(data_dir: Path, strategy: str, factor: float, stage: int, samples: Optional[int], yaw_std: float,
               pitch_std: float, seed: int, out_path: Path) -> None:
    """Generate the novel cameras of one stage as a plan file."""
    bundle = load_dataset(data_dir)
    points = _require_points(bundle)
    base = [(img.name, bundle.intrinsics(img), img.pose) for img in bundle.split(TRAIN_SPLIT)]
    chosen = TrajectoryStrategy(kind=StrategyKind(strategy), yaw_std_deg=yaw_std, pitch_std_deg=pitch_std,
                                sample_count=samples, seed=seed).at_altitude(factor)
    plan = generate(chosen, base, points.mean(axis=0), estimate_ground_height(points), stage=stage)
    write_plan(out_path, plan)
    for camera_id, message in plan.errors:
        click.echo(f"skipped {camera_id}: {message}", err=True)
    click.echo(f"Wrote {len(plan)} cameras -> {out_path}")


@cli.command()
@click.option('--data', 'data_dir', required=True, type=DIR, help="Dataset directory.")
@click.option('--config', 'config_path', type=FILE, help="Pipeline YAML config; flags override it.")
@click.option('--strategy', type=click.Choice(STRATEGIES), help="Trajectory strategy.")
@click.option('--schedule', help="Comma separated altitude factors; '' runs plain training.")
@click.option('--fixer', type=click.Choice(FIXER_NAMES), help="View fixer.")
@click.option('--fixer-command', help="Command line of the extern fixer.")
@click.option('--blur-sigma', type=click.FloatRange(min=0.0), help="Sigma of the blur fixer.")
@click.option('--filter-tau', type=click.FloatRange(min=0.0, max=MAX_TAU),
              help="DSSIM threshold of the view filter.")
@click.option('--filter-action', type=click.Choice(FILTER_ACTIONS), help="What the filter does with bad views.")
@click.option('--initial-iterations', type=click.IntRange(min=0))
@click.option('--stage-iterations', type=click.IntRange(min=0))
@click.option('--workers', type=click.IntRange(min=1))
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', 'out_dir', required=True, type=OUT_DIR)
def refine(data_dir: Path, config_path: Optional[Path], strategy: Optional[str], schedule: Optional[str],
           fixer: Optional[str], fixer_command: Optional[str], blur_sigma: Optional[float],
           filter_tau: Optional[float], filter_action: Optional[str], initial_iterations: Optional[int],
           stage_iterations: Optional[int], workers: Optional[int], seed: int, out_dir: Path) -> None:
    """Run altitude-progressive refinement on a dataset."""
    cfg = _config(config_path)
    if strategy is not None:
        cfg = replace(cfg, strategy=replace(cfg.strategy, kind=StrategyKind(strategy)))
    if fixer is not None or fixer_command is not None or blur_sigma is not None:
        cfg = replace(cfg, fixer=FixerConfig(
            name=fixer or cfg.fixer.name,
            blur_sigma=cfg.fixer.blur_sigma if blur_sigma is None else blur_sigma,
            command=tuple(shlex.split(fixer_command)) if fixer_command else cfg.fixer.command,
            attempts=cfg.fixer.attempts, timeout=cfg.fixer.timeout))
    if filter_tau is not None or filter_action is not None:
        cfg = replace(cfg, filter=replace(cfg.filter, tau=cfg.filter.tau if filter_tau is None else filter_tau,
                                          action=filter_action or cfg.filter.action))
    cfg = cfg.with_overrides(schedule=None if schedule is None else tuple(parse_schedule(schedule)),
                             initial_iterations=initial_iterations, stage_iterations=stage_iterations,
                             workers=workers, seed=seed)
    cfg = replace(cfg, strategy=replace(cfg.strategy, seed=seed))

    bundle = load_dataset(data_dir)
    views = _train_views(bundle)
    points = _require_points(bundle)
    ground = dataset_views(bundle, EVAL_SPLIT)
    view_fixer = make_fixer(cfg.fixer.name, cfg.fixer.blur_sigma, gt_scene=bundle.gt_scene,
                            command=cfg.fixer.command, attempts=cfg.fixer.attempts, timeout=cfg.fixer.timeout,
                            settings=cfg.render)
    logger.info("Starting refinement", extra={"stages": len(cfg.schedule), "fixer": view_fixer.name,
                                              "strategy": cfg.strategy.kind.value, "seed": seed})
    result = run_progressive(cfg, views, ground, points, bundle.colors, fixer=view_fixer)

    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.scene, out_dir / 'scene.pdgs')
    result.metrics.to_csv(out_dir / 'metrics.csv', index=False)
    (out_dir / 'config.yaml').write_text(yaml.safe_dump(pipeline_config_to_dict(cfg), sort_keys=False),
                                         encoding='utf-8')
    storage = StageRecordStorage(str(out_dir))
    for stage in result.stages:
        storage.save_stage('stages', stage)
        write_plan(out_dir / 'plans' / f"stage_{stage.index:02d}.txt", stage.plan)
    report = generate_report(result.metrics, result.initial_losses, [s.losses for s in result.stages])
    write_report_html(out_dir / 'report.html', report)
    _echo_table(result.metrics)
    click.echo(f"Refined scene ({len(result.scene)} Gaussians, {len(result.views)} views) -> {out_dir}")


def _image_files(directory: Path) -> dict:
    return {p.name: p for p in sorted(directory.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES}


def compare_directories(pred_dir: Path, gt_dir: Path, scales: Sequence[int] = (1, 2, 4)) -> pd.DataFrame:
    """
    Metric rows for every image name present in both directories.

    Identical images give PSNR = inf, SSIM = 1 and edge L2 = 0.
    """
    pred, gt = _image_files(pred_dir), _image_files(gt_dir)
    common = [name for name in gt if name in pred]
    if not common:
        raise PipelineError(f"No image names in common between {pred_dir} and {gt_dir}")
    missing = sorted(set(gt) ^ set(pred))
    if missing:
        logger.warning("Images present in only one directory are skipped", extra={"count": len(missing)})
    rows = []
    for name in common:
        a, b = read_image(pred[name]), read_image(gt[name])
        rows.append({'view': name, 'psnr': psnr(a, b), 'ssim': ssim(a, b), 'edge_l2': edge_weighted_l2(a, b, scales)})
    return pd.DataFrame(rows, columns=['view', 'psnr', 'ssim', 'edge_l2'])


@cli.command('eval')
@click.option('--pred', 'pred_dir', type=DIR, help="Directory of rendered images.")
@click.option('--gt', 'gt_dir', type=DIR, help="Directory of ground-truth images with the same names.")
@click.option('--scene', 'scene_path', type=FILE, help="Checkpoint to evaluate on a dataset split.")
@click.option('--data', 'data_dir', type=DIR, help="Dataset for --scene.")
@click.option('--split', type=click.Choice([TRAIN_SPLIT, EVAL_SPLIT]), default=EVAL_SPLIT, show_default=True)
@click.option('--out', 'out_path', type=click.Path(dir_okay=False, path_type=Path), help="CSV output.")
def eval_command(pred_dir: Optional[Path], gt_dir: Optional[Path], scene_path: Optional[Path],
                 data_dir: Optional[Path], split: str, out_path: Optional[Path]) -> None:
    """Image-quality table for two image directories or a checkpoint on a dataset."""
    if pred_dir is not None and gt_dir is not None and scene_path is None and data_dir is None:
        table = compare_directories(pred_dir, gt_dir)
    elif scene_path is not None and data_dir is not None and pred_dir is None and gt_dir is None:
        cfg = PipelineConfig()
        views = dataset_views(load_dataset(data_dir), split)
        if not views:
            raise PipelineError(f"Dataset {data_dir} has no '{split}' images")
        table = evaluate_views(load_checkpoint(scene_path), views, cfg.render, cfg.loss)
    else:
        raise click.UsageError("Give either --pred and --gt, or --scene and --data")
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_path, index=False)
    _echo_table(table)


def _parse_tokens(text: Optional[str], count: int) -> List[int]:
    if not text:
        return [count // 2]
    try:
        return [int(t) for t in text.split(',') if t.strip()]
    except ValueError as e:
        raise click.BadParameter(f"tokens must be comma separated integers: {e}", param_hint="'--tokens'") from e


@cli.command('mask-debug')
@click.option('--data', 'data_dir', required=True, type=DIR, help="Dataset directory.")
@click.option('--novel', required=True, help="Novel view: dataset image name, or camera id in --plan.")
@click.option('--reference', required=True, help="Reference dataset image name.")
@click.option('--plan', 'plan_path', type=FILE, help="Plan to look the novel camera up in.")
@click.option('--rows', type=click.IntRange(min=1), default=8, show_default=True)
@click.option('--cols', type=click.IntRange(min=1), default=8, show_default=True)
@click.option('--band', type=click.FloatRange(min=0.0), help="Band in pixels (default: half patch diagonal).")
@click.option('--dilation', type=click.IntRange(min=0), default=1, show_default=True)
@click.option('--tokens', help="Comma separated novel tokens to draw (default: the center token).")
@click.option('--out', 'out_dir', required=True, type=OUT_DIR)
def mask_debug(data_dir: Path, novel: str, reference: str, plan_path: Optional[Path], rows: int, cols: int,
               band: Optional[float], dilation: int, tokens: Optional[str], out_dir: Path) -> None:
    """Draw epipolar attention mask rows as graymaps."""
    bundle = load_dataset(data_dir)
    by_name = {img.name: img for img in bundle.images.values()}
    if reference not in by_name:
        raise click.BadParameter(f"unknown image '{reference}'", param_hint="'--reference'")
    ref_img = by_name[reference]
    ref_intr = bundle.intrinsics(ref_img)
    if plan_path is not None:
        planned = {c.camera_id: c for c in read_plan(plan_path)}
        if novel not in planned:
            raise click.BadParameter(f"camera '{novel}' is not in {plan_path}", param_hint="'--novel'")
        novel_cam = (planned[novel].intrinsics, planned[novel].pose)
        pose_source = 'plan'
    else:
        if novel not in by_name:
            raise click.BadParameter(f"unknown image '{novel}'", param_hint="'--novel'")
        novel_cam = (bundle.intrinsics(by_name[novel]), by_name[novel].pose)
        pose_source = 'dataset'

    grid = TokenGrid.for_image(ref_intr, rows, cols)
    if TokenGrid.for_image(novel_cam[0], rows, cols) != grid:
        raise click.UsageError("Novel and reference images must share one token grid")
    mask = build_epipolar_mask(novel_cam, (ref_intr, ref_img.pose), grid, band, dilation, pose_source)
    picked = _parse_tokens(tokens, grid.num_tokens)
    written = write_mask_rows(out_dir, mask, picked, bundle.load_pixels(ref_img))
    click.echo(f"density={mask.bits.mean():.4f} misses={len(mask.misses)} fallbacks={len(mask.fallbacks)}")
    click.echo(f"Wrote {len(written)} images -> {out_dir}")


@cli.command()
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', 'out_dir', required=True, type=OUT_DIR)
def synthetic(seed: int, out_dir: Path) -> None:
    """Write a synthetic aerial/ground dataset with its hidden scene."""
    data = synthetic_scene_generator(seed)
    images, pixels, splits = {}, {}, {}
    for image_id, view in enumerate(data.aerial + data.ground, start=1):
        name = f"{view.image_id}.png"
        images[image_id] = ColmapImage(image_id, name, 1, view.pose)
        pixels[image_id] = view.image
        splits[name] = TRAIN_SPLIT if view.source == 'aerial' else EVAL_SPLIT
    write_dataset(out_dir, {1: data.intrinsics}, images, pixels, splits, data.points, data.colors,
                  gt_scene=data.gt_scene)
    click.echo(f"Wrote {len(data.aerial)} aerial and {len(data.ground)} ground views -> {out_dir}")


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI and return its exit code instead of exiting.

    Returns:
        0 on success, 1 on usage errors, 2 on runtime errors
    """
    try:
        rv = cli.main(args=None if argv is None else list(argv), prog_name='altisplat', standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 2
    except (AltisplatError, OSError) as e:
        logger.error("Command failed", extra={"error": str(e), "error_type": type(e).__name__})
        click.echo(f"Error: {e}", err=True)
        return 2
    return rv if isinstance(rv, int) else 0
