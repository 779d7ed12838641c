"""
Renderer configuration and result types.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.errors import RenderError


@dataclass(frozen=True)
class RenderSettings:
    """
    Rasterizer settings.

    Attributes:
        tile_size: tile edge in pixels
        near, far: camera-space depth clip planes
        background: RGB in [0, 1] behind all splats
        max_splats_per_pixel: cap on contributing splats per pixel
        low_pass: floor added to the diagonal of every 2D covariance (pixels^2)
        min_alpha: per-pixel alphas below this are skipped
        alpha_clip: per-pixel alpha ceiling
        workers: threads used to rasterize tiles (1 = inline)
    """

    tile_size: int = 16
    near: float = 0.01
    far: float = 1.0e4
    background: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    max_splats_per_pixel: int = 256
    low_pass: float = 0.3
    min_alpha: float = 1.0 / 255.0
    alpha_clip: float = 0.99
    workers: int = 1

    def __post_init__(self):
        if self.tile_size < 1:
            raise RenderError(f"Tile size must be >= 1, got {self.tile_size}")
        if not 0 < self.near < self.far:
            raise RenderError(f"Need 0 < near < far, got near={self.near}, far={self.far}")
        bg = tuple(float(c) for c in self.background)
        if len(bg) != 3 or not all(0.0 <= c <= 1.0 for c in bg):
            raise RenderError(f"Background must be an RGB triple in [0, 1], got {self.background}")
        object.__setattr__(self, "background", bg)
        if self.max_splats_per_pixel < 1:
            raise RenderError("max_splats_per_pixel must be >= 1")
        if self.low_pass < 0:
            raise RenderError("Low-pass floor must be >= 0")
        if not 0.0 <= self.min_alpha < self.alpha_clip <= 1.0:
            raise RenderError(f"Need 0 <= min_alpha < alpha_clip <= 1, got {self.min_alpha}, {self.alpha_clip}")
        if self.workers < 1:
            raise RenderError("workers must be >= 1")

    @property
    def background_array(self) -> np.ndarray:
        return np.array(self.background, dtype=np.float64)


@dataclass(frozen=True)
class ProjectedSplat:
    """
    One Gaussian after projection.

    Attributes:
        index: primitive index in the scene
        mean2d: projected center in pixels
        cov2d: 2x2 image-space covariance (low-pass floor included)
        depth: camera-frame z
        color: RGB
        opacity: effective (modulated) opacity
    """

    index: int
    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    opacity: float

    @property
    def conic(self) -> np.ndarray:
        return np.linalg.inv(self.cov2d)

    def alpha_at(self, pixel, alpha_clip: float = 0.99) -> float:
        """opacity * exp(-1/2 delta^T cov2d^-1 delta), clipped."""
        delta = np.asarray(pixel, dtype=np.float64) - self.mean2d
        power = -0.5 * float(delta @ self.conic @ delta)
        return min(self.opacity * float(np.exp(power)), alpha_clip)


@dataclass
class RenderOutput:
    """Rendered image (H, W, 3), accumulated alpha (H, W) and expected depth (H, W)."""

    image: np.ndarray
    alpha: np.ndarray
    depth: Optional[np.ndarray] = field(default=None)
