"""
Image quality metrics: PSNR, SSIM and DSSIM, with the SSIM gradient used for
training.

Images are float arrays in [0, 1], shaped (H, W) or (H, W, C).
"""

from typing import Tuple

import numpy as np
from scipy import ndimage

from src.errors import LossError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LossError(f"Shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 log10(1 / MSE) in dB; identical images give +inf."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float('inf')
    return 10.0 * np.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_full(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(x, taps, axis=0, mode='constant')
    return ndimage.correlate1d(out, taps, axis=1, mode='constant')


def _valid(x: np.ndarray, half: int) -> np.ndarray:
    return x[half:x.shape[0] - half, half:x.shape[1] - half]


def _as_channels(x: np.ndarray) -> np.ndarray:
    return x[..., None] if x.ndim == 2 else x


def ssim_and_gradient(pred: np.ndarray, target: np.ndarray,
                      window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA,
                      data_range: float = 1.0, with_gradient: bool = True):
    """
    Mean SSIM over valid windows and its gradient w.r.t. pred.

    Returns:
        (ssim, d_ssim/d_pred or None)
    """
    pred, target = _check_pair(pred, target)
    if pred.ndim not in (2, 3):
        raise LossError(f"Expected (H, W) or (H, W, C) images, got {pred.shape}")
    if pred.shape[0] < window or pred.shape[1] < window:
        raise LossError(f"Image {pred.shape[:2]} is smaller than the {window}x{window} SSIM window")
    x = _as_channels(pred)
    y = _as_channels(target)
    taps = gaussian_window(window, sigma)
    half = window // 2
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    mu_x = _valid(_filter_full(x, taps), half)
    mu_y = _valid(_filter_full(y, taps), half)
    e_xx = _valid(_filter_full(x * x, taps), half)
    e_yy = _valid(_filter_full(y * y, taps), half)
    e_xy = _valid(_filter_full(x * y, taps), half)
    var_x = e_xx - mu_x ** 2
    var_y = e_yy - mu_y ** 2
    cov = e_xy - mu_x * mu_y

    a1 = 2 * mu_x * mu_y + c1
    a2 = 2 * cov + c2
    b1 = mu_x ** 2 + mu_y ** 2 + c1
    b2 = var_x + var_y + c2
    ssim_map = (a1 * a2) / (b1 * b2)
    value = float(ssim_map.mean())
    if not with_gradient:
        return value, None

    m = 1.0 / ssim_map.size
    denom = b1 * b2
    d_mu_x = m * ((2 * mu_y * a2 - 2 * mu_y * a1) / denom - ssim_map * (2 * mu_x / b1 - 2 * mu_x / b2))
    d_e_xx = m * (-ssim_map / b2)
    d_e_xy = m * (2 * a1 / denom)

    def adjoint(g: np.ndarray) -> np.ndarray:
        full = np.zeros_like(x)
        full[half:x.shape[0] - half, half:x.shape[1] - half] = g
        return _filter_full(full, taps)

    grad = adjoint(d_mu_x) + 2 * x * adjoint(d_e_xx) + y * adjoint(d_e_xy)
    return value, grad.reshape(pred.shape)


def ssim(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> float:
    """Mean local SSIM (11x11 Gaussian window, sigma 1.5) over valid windows."""
    value, _ = ssim_and_gradient(a, b, window, sigma, with_gradient=False)
    return value


def dssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural dissimilarity (1 - SSIM) / 2."""
    return (1.0 - ssim(a, b)) / 2.0


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _check_pair(a, b)
    return float(np.mean((a - b) ** 2))
