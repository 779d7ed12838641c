"""
Data module initialization
"""

from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .colmap import (
    ColmapImage,
    format_colmap_cameras,
    format_colmap_images,
    format_colmap_points3d,
    parse_colmap_cameras,
    parse_colmap_images,
    parse_colmap_points3d,
    read_colmap_model,
    write_colmap_model,
)
from .dataset import DatasetBundle, load_dataset, parse_splits, write_dataset
from .images import read_image, to_uint8, write_graymap, write_image
from .plans import format_plan, parse_plan, read_plan, write_plan
from .ply import format_ply_points, parse_ply_points, read_ply_points, write_ply_points
from .storage import StageRecordStorage

__all__ = [
    'decode_checkpoint',
    'encode_checkpoint',
    'load_checkpoint',
    'save_checkpoint',
    'ColmapImage',
    'format_colmap_cameras',
    'format_colmap_images',
    'format_colmap_points3d',
    'parse_colmap_cameras',
    'parse_colmap_images',
    'parse_colmap_points3d',
    'read_colmap_model',
    'write_colmap_model',
    'DatasetBundle',
    'load_dataset',
    'parse_splits',
    'write_dataset',
    'read_image',
    'to_uint8',
    'write_graymap',
    'write_image',
    'format_plan',
    'parse_plan',
    'read_plan',
    'write_plan',
    'format_ply_points',
    'parse_ply_points',
    'read_ply_points',
    'write_ply_points',
    'StageRecordStorage',
]
