"""
Renderer module initialization
"""

from .settings import RenderSettings, ProjectedSplat, RenderOutput
from .projection import ProjectionBatch, project_gaussian, project_scene
from .rasterizer import Tile, build_tiles, composite_pixel, composite_tile, rasterize, render
from .backward import check_finite, projection_backward, rasterize_backward, render_with_gradients

__all__ = [
    'RenderSettings',
    'ProjectedSplat',
    'RenderOutput',
    'ProjectionBatch',
    'project_gaussian',
    'project_scene',
    'Tile',
    'build_tiles',
    'composite_pixel',
    'composite_tile',
    'rasterize',
    'render',
    'check_finite',
    'projection_backward',
    'rasterize_backward',
    'render_with_gradients',
]
