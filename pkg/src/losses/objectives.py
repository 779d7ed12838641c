"""
Training objective for splat optimization.

L = lambda_1 * DSSIM(render, gt) + lambda_2 * mean squared error
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from src.errors import LossError
from .edges import edge_weighted_l2
from .metrics import ssim_and_gradient


@dataclass(frozen=True)
class LossConfig:
    """
    Loss weights.

    Attributes:
        lambda_dssim: weight of the DSSIM term
        lambda_l2: weight of the mean squared error term
        sobel_scales: downsample factors for the edge-weighted L2
        edge_floor: constant w0 added to the normalized edge weights
    """

    lambda_dssim: float = 0.2
    lambda_l2: float = 0.8
    sobel_scales: Tuple[int, ...] = field(default=(1, 2, 4))
    edge_floor: float = 1.0

    def __post_init__(self):
        if self.lambda_dssim < 0 or self.lambda_l2 < 0:
            raise LossError("Loss weights must be >= 0")
        scales = tuple(int(s) for s in self.sobel_scales)
        if any(s < 1 for s in scales) or len(set(scales)) != len(scales):
            raise LossError(f"Sobel scales must be distinct positive integers, got {self.sobel_scales}")
        if self.edge_floor < 0:
            raise LossError("Edge floor must be >= 0")
        object.__setattr__(self, "sobel_scales", scales)


def splat_loss_and_gradient(render: np.ndarray, gt: np.ndarray,
                            cfg: LossConfig = LossConfig()) -> Tuple[float, np.ndarray]:
    """
    Splat training loss and its gradient w.r.t. the rendered image.

    Returns:
        (loss, dL/d_render with the render's shape)
    """
    render = np.asarray(render, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if render.shape != gt.shape:
        raise LossError(f"Render {render.shape} and target {gt.shape} differ in shape")
    diff = render - gt
    loss = cfg.lambda_l2 * float(np.mean(diff ** 2))
    grad = cfg.lambda_l2 * 2.0 * diff / diff.size
    if cfg.lambda_dssim > 0:
        value, d_ssim = ssim_and_gradient(render, gt)
        loss += cfg.lambda_dssim * (1.0 - value) / 2.0
        grad = grad - cfg.lambda_dssim * 0.5 * d_ssim
    return loss, grad


def splat_loss(render: np.ndarray, gt: np.ndarray, cfg: LossConfig = LossConfig()) -> float:
    """lambda_1 * DSSIM + lambda_2 * MSE."""
    loss, _ = splat_loss_and_gradient(render, gt, cfg)
    return loss


def edge_loss(pred: np.ndarray, target: np.ndarray, cfg: LossConfig = LossConfig()) -> float:
    """Multi-scale edge-weighted L2 under the config's scales and floor."""
    return edge_weighted_l2(pred, target, cfg.sobel_scales, cfg.edge_floor)
