"""
Tile-based alpha compositing.

The image is split into square tiles. Each tile gathers the splats whose
reach overlaps it, orders them front to back by (depth, primitive index) and
composites

    C(p) = sum_i alpha_i(p) c_i prod_{j<i} (1 - alpha_j(p)) + T(p) * background

for all of its pixels at once. A splat's reach is the largest offset at
which its alpha can still exceed the skip threshold, so the tiled result
matches compositing every splat at every pixel.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.geometry.cameras import CameraIntrinsics, CameraPose
from src.scene.gaussians import GaussianScene
from .projection import ProjectionBatch, project_scene
from .settings import RenderOutput, RenderSettings

logger = logging.getLogger(__name__)


@dataclass
class Tile:
    y0: int
    y1: int
    x0: int
    x1: int
    order: np.ndarray


@dataclass
class TileState:
    """Per-tile compositing intermediates kept for the backward pass."""

    tile: Tile
    dx: np.ndarray
    dy: np.ndarray
    gauss: np.ndarray
    raw: np.ndarray
    alpha: np.ndarray
    grad_mask: np.ndarray
    transmittance: np.ndarray
    weights: np.ndarray
    final_t: np.ndarray


def composite_pixel(entries: Iterable[Tuple[float, Sequence[float]]], background,
                    alpha_clip: float = 0.99, min_alpha: float = 0.0) -> np.ndarray:
    """
    Front-to-back compositing of (alpha, color) entries already sorted by depth.

    Alphas are clipped to alpha_clip; entries below min_alpha are skipped.
    """
    color = np.zeros(3)
    transmittance = 1.0
    for alpha, c in entries:
        alpha = min(float(alpha), alpha_clip)
        if alpha < min_alpha:
            continue
        color += alpha * transmittance * np.asarray(c, dtype=np.float64)
        transmittance *= 1.0 - alpha
    return color + transmittance * np.asarray(background, dtype=np.float64)


def build_tiles(batch: ProjectionBatch, width: int, height: int, tile_size: int) -> List[Tile]:
    """Tiles in row-major order with their depth-sorted splat lists."""
    ids = np.flatnonzero(batch.visible)
    u = batch.mean2d[ids, 0]
    v = batch.mean2d[ids, 1]
    r = batch.radius[ids]
    depth = batch.depth[ids]
    tiles = []
    for y0 in range(0, height, tile_size):
        y1 = min(y0 + tile_size, height)
        for x0 in range(0, width, tile_size):
            x1 = min(x0 + tile_size, width)
            hit = (u + r >= x0) & (u - r <= x1 - 1) & (v + r >= y0) & (v - r <= y1 - 1)
            sel = ids[hit]
            order = sel[np.lexsort((sel, depth[hit]))]
            tiles.append(Tile(y0, y1, x0, x1, order))
    return tiles


def _exclusive_cumprod(x: np.ndarray) -> np.ndarray:
    ones = np.ones((x.shape[0], 1))
    return np.cumprod(np.hstack([ones, x]), axis=1)


def composite_tile(batch: ProjectionBatch, tile: Tile, settings: RenderSettings):
    """
    Composite one tile.

    Returns:
        (color (h, w, 3), alpha (h, w), depth (h, w), TileState)
    """
    h, w = tile.y1 - tile.y0, tile.x1 - tile.x0
    ys, xs = np.mgrid[tile.y0:tile.y1, tile.x0:tile.x1]
    px = xs.reshape(-1).astype(np.float64)
    py = ys.reshape(-1).astype(np.float64)
    order = tile.order

    dx = px[:, None] - batch.mean2d[order, 0][None, :]
    dy = py[:, None] - batch.mean2d[order, 1][None, :]
    a, b, c = batch.conic[order, 0], batch.conic[order, 1], batch.conic[order, 2]
    power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
    gauss = np.exp(np.minimum(power, 0.0))
    raw = batch.opacity[order][None, :] * gauss
    alpha = np.minimum(raw, settings.alpha_clip)

    contributing = alpha >= settings.min_alpha
    contributing &= np.cumsum(contributing, axis=1) <= settings.max_splats_per_pixel
    alpha = np.where(contributing, alpha, 0.0)
    grad_mask = contributing & (raw < settings.alpha_clip)

    trans_all = _exclusive_cumprod(1.0 - alpha)
    transmittance = trans_all[:, :-1]
    final_t = trans_all[:, -1]
    weights = alpha * transmittance

    color = weights @ batch.color[order] + final_t[:, None] * settings.background_array[None, :]
    depth = weights @ batch.depth[order]
    state = TileState(tile, dx, dy, gauss, raw, alpha, grad_mask, transmittance, weights, final_t)
    return color.reshape(h, w, 3), (1.0 - final_t).reshape(h, w), depth.reshape(h, w), state


def _map_tiles(fn, tiles: List[Tile], workers: int) -> list:
    if workers <= 1 or len(tiles) <= 1:
        return [fn(t) for t in tiles]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tiles))


def rasterize(batch: ProjectionBatch, width: int, height: int, settings: RenderSettings,
              keep_state: bool = False):
    """
    Composite every tile into full-resolution buffers.

    Returns:
        (image (H, W, 3), alpha (H, W), depth (H, W), tile states or None)
    """
    tiles = build_tiles(batch, width, height, settings.tile_size)
    results = _map_tiles(lambda t: composite_tile(batch, t, settings), tiles, settings.workers)

    image = np.empty((height, width, 3))
    alpha = np.empty((height, width))
    depth = np.empty((height, width))
    states: Optional[List[TileState]] = [] if keep_state else None
    for tile, (c, a, d, state) in zip(tiles, results):
        image[tile.y0:tile.y1, tile.x0:tile.x1] = c
        alpha[tile.y0:tile.y1, tile.x0:tile.x1] = a
        depth[tile.y0:tile.y1, tile.x0:tile.x1] = d
        if keep_state:
            states.append(state)
    return image, alpha, depth, states


def render(scene: GaussianScene, intr: CameraIntrinsics, pose: CameraPose,
           settings: Optional[RenderSettings] = None, image_id: Optional[str] = None) -> RenderOutput:
    """
    Render the scene from one camera.

    Args:
        scene: nonempty GaussianScene
        intr: camera intrinsics (sets the output resolution)
        pose: camera pose
        settings: rasterizer settings
        image_id: training image whose appearance transform is applied; None for identity

    Returns:
        RenderOutput with image, accumulated alpha and depth
    """
    settings = settings or RenderSettings()
    batch = project_scene(scene, intr, pose, settings)
    raw_image, alpha, depth, _ = rasterize(batch, intr.width, intr.height, settings)
    image, _ = scene.appearance.apply(raw_image, image_id)
    return RenderOutput(image=image, alpha=alpha, depth=depth)
