"""
Scene module initialization
"""

from .gaussians import (
    GaussianPrimitive,
    GaussianScene,
    GAUSSIAN_FIELDS,
    covariance_from_params,
    evaluate_gaussian,
    init_from_points,
    nearest_neighbor_scale,
    logit,
)
from .modulator import AdaptiveModulator, ModulatorNet, modulate, sigmoid, distance_feature
from .appearance import AppearanceTable, apply_appearance

__all__ = [
    'GaussianPrimitive',
    'GaussianScene',
    'GAUSSIAN_FIELDS',
    'covariance_from_params',
    'evaluate_gaussian',
    'init_from_points',
    'nearest_neighbor_scale',
    'logit',
    'AdaptiveModulator',
    'ModulatorNet',
    'modulate',
    'sigmoid',
    'distance_feature',
    'AppearanceTable',
    'apply_appearance',
]
