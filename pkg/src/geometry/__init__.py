"""
Geometry module initialization
"""

from .cameras import (
    CameraIntrinsics,
    CameraPose,
    Ray,
    PluckerRay,
    RelativePose,
    EpipolarLine,
    pixel_to_ray,
    plucker_embedding,
    plucker_ray_map,
    project_points,
    relative_pose,
    compose_relative,
    camera_scene_distance,
    pose_difference_features,
    reference_pose_features,
)
from .epipolar import fundamental_matrix, epipolar_line, epipolar_lines, skew

__all__ = [
    'CameraIntrinsics',
    'CameraPose',
    'Ray',
    'PluckerRay',
    'RelativePose',
    'EpipolarLine',
    'pixel_to_ray',
    'plucker_embedding',
    'plucker_ray_map',
    'project_points',
    'relative_pose',
    'compose_relative',
    'camera_scene_distance',
    'pose_difference_features',
    'reference_pose_features',
    'fundamental_matrix',
    'epipolar_line',
    'epipolar_lines',
    'skew',
]
