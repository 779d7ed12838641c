"""
Sobel edge maps and the multi-scale edge-weighted L2 loss.
"""

from typing import Sequence

import numpy as np
from scipy import ndimage

from src.errors import LossError

SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                    [-2.0, 0.0, 2.0],
                    [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T


def sobel_magnitude(image: np.ndarray) -> np.ndarray:
    """
    Gradient magnitude sqrt(Gx^2 + Gy^2) with replicate-padded borders.

    Color images are processed per channel and the magnitudes averaged.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        gx = ndimage.correlate(img, SOBEL_X, mode='nearest')
        gy = ndimage.correlate(img, SOBEL_Y, mode='nearest')
        return np.sqrt(gx ** 2 + gy ** 2)
    if img.ndim == 3:
        return np.mean([sobel_magnitude(img[..., c]) for c in range(img.shape[2])], axis=0)
    raise LossError(f"Expected (H, W) or (H, W, C) image, got {img.shape}")


def downsample(image: np.ndarray, factor: int) -> np.ndarray:
    """Average pooling by an integer factor, cropping any remainder."""
    if factor < 1:
        raise LossError(f"Downsample factor must be >= 1, got {factor}")
    img = np.asarray(image, dtype=np.float64)
    if factor == 1:
        return img
    h = img.shape[0] // factor * factor
    w = img.shape[1] // factor * factor
    if h == 0 or w == 0:
        raise LossError(f"Image {img.shape[:2]} too small for factor {factor}")
    cropped = img[:h, :w]
    shape = (h // factor, factor, w // factor, factor) + img.shape[2:]
    return cropped.reshape(shape).mean(axis=(1, 3))


def normalized_edge_weight(target: np.ndarray) -> np.ndarray:
    """Sobel magnitude of the target scaled to [0, 1] (all zeros for flat images)."""
    edges = sobel_magnitude(target)
    peak = edges.max()
    return edges / peak if peak > 0 else np.zeros_like(edges)


def edge_weighted_l2(pred: np.ndarray, target: np.ndarray, scales: Sequence[int] = (1, 2, 4),
                     floor: float = 1.0) -> float:
    """
    Sum over scales of mean((floor + edge_weight(target_s)) * (pred_s - target_s)^2).

    Weights come from the target only; images are average-pooled per scale.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise LossError(f"Shape mismatch: {pred.shape} vs {target.shape}")
    total = 0.0
    for s in scales:
        p = downsample(pred, s)
        t = downsample(target, s)
        weight = floor + normalized_edge_weight(t)
        if p.ndim == 3:
            weight = weight[..., None]
        total += float(np.mean(weight * (p - t) ** 2))
    return total
