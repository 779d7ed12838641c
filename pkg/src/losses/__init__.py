"""
Losses module initialization
"""

from .metrics import psnr, ssim, dssim, mse, ssim_and_gradient, gaussian_window
from .edges import sobel_magnitude, downsample, normalized_edge_weight, edge_weighted_l2
from .objectives import LossConfig, splat_loss, splat_loss_and_gradient, edge_loss

__all__ = [
    'psnr',
    'ssim',
    'dssim',
    'mse',
    'ssim_and_gradient',
    'gaussian_window',
    'sobel_magnitude',
    'downsample',
    'normalized_edge_weight',
    'edge_weighted_l2',
    'LossConfig',
    'splat_loss',
    'splat_loss_and_gradient',
    'edge_loss',
]
