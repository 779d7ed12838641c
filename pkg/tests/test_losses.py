import numpy as np
import pytest

from src.errors import LossError
from src.losses import (
    LossConfig,
    downsample,
    dssim,
    edge_loss,
    edge_weighted_l2,
    mse,
    psnr,
    sobel_magnitude,
    splat_loss,
    splat_loss_and_gradient,
    ssim,
)


def naive_ssim(a, b, window=11, sigma=1.5):
    """Mean SSIM from explicit weighted sums over every valid window."""
    taps = np.exp(-0.5 * ((np.arange(window) - (window - 1) / 2.0) / sigma) ** 2)
    w = np.outer(taps, taps)
    w /= w.sum()
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    a = a[..., None] if a.ndim == 2 else a
    b = b[..., None] if b.ndim == 2 else b
    values = []
    for ch in range(a.shape[2]):
        for i in range(a.shape[0] - window + 1):
            for j in range(a.shape[1] - window + 1):
                x = a[i:i + window, j:j + window, ch]
                y = b[i:i + window, j:j + window, ch]
                mx, my = (w * x).sum(), (w * y).sum()
                vx = (w * x * x).sum() - mx ** 2
                vy = (w * y * y).sum() - my ** 2
                cov = (w * x * y).sum() - mx * my
                values.append(((2 * mx * my + c1) * (2 * cov + c2)) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
    return float(np.mean(values))


def test_psnr_examples():
    img = np.random.default_rng(0).uniform(size=(8, 8, 3))
    assert psnr(img, img) == float('inf')
    assert psnr(np.zeros((4, 4)), np.ones((4, 4))) == pytest.approx(0.0)
    assert psnr(np.full((4, 4, 3), 0.5), np.full((4, 4, 3), 0.6)) == pytest.approx(20.0, abs=1e-9)


def test_psnr_shape_mismatch():
    with pytest.raises(LossError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_ssim_identity_and_distortion():
    img = np.random.default_rng(1).uniform(size=(24, 24, 3))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)
    assert dssim(img, img) == pytest.approx(0.0, abs=1e-12)
    assert ssim(img, 1.0 - img) < 1.0
    assert dssim(img, 1.0 - img) > 0.0


def test_ssim_matches_naive_windows():
    rng = np.random.default_rng(2)
    a = rng.uniform(size=(16, 18, 3))
    b = np.clip(a + rng.normal(0.0, 0.1, size=a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-10)
    gray_a, gray_b = a[..., 0], b[..., 1]
    assert ssim(gray_a, gray_b) == pytest.approx(naive_ssim(gray_a, gray_b), abs=1e-10)


def test_ssim_rejects_small_images():
    with pytest.raises(LossError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


def test_sobel_constant_image():
    assert np.array_equal(sobel_magnitude(np.full((6, 7), 0.4)), np.zeros((6, 7)))


def test_sobel_vertical_step():
    h = 0.7
    img = np.zeros((5, 5))
    img[:, 2:] = h
    edges = sobel_magnitude(img)
    assert np.allclose(edges[1:4, 1], 4 * h)
    assert np.allclose(edges[1:4, 2], 4 * h)
    assert np.allclose(edges[1:4, 4], 0.0)


def test_sobel_rotation_and_translation():
    rng = np.random.default_rng(3)
    img = rng.uniform(size=(20, 20))
    assert np.allclose(sobel_magnitude(np.rot90(img)), np.rot90(sobel_magnitude(img)), atol=1e-12)
    shifted = np.roll(img, (3, 2), axis=(0, 1))
    a = sobel_magnitude(shifted)[5:18, 4:18]
    b = sobel_magnitude(img)[2:15, 2:16]
    assert np.allclose(a, b, atol=1e-12)


def test_downsample():
    img = np.arange(16, dtype=float).reshape(4, 4)
    assert np.allclose(downsample(img, 2), [[2.5, 4.5], [10.5, 12.5]])
    assert downsample(np.zeros((5, 7, 3)), 2).shape == (2, 3, 3)
    with pytest.raises(LossError):
        downsample(img, 0)


def test_edge_weighted_l2_properties():
    rng = np.random.default_rng(4)
    target = rng.uniform(size=(16, 16, 3))
    pred = rng.uniform(size=(16, 16, 3))
    assert edge_weighted_l2(target, target) == 0.0

    flat = np.full((16, 16, 3), 0.5)
    plain = sum(mse(downsample(pred, s), downsample(flat, s)) for s in (1, 2, 4))
    assert edge_weighted_l2(pred, flat, floor=2.0) == pytest.approx(2.0 * plain)

    low = edge_weighted_l2(pred, target, scales=(1,), floor=0.5)
    high = edge_weighted_l2(pred, target, scales=(1,), floor=1.5)
    assert low < high
    assert low >= 0.5 * mse(pred, target)
    assert low <= 1.5 * mse(pred, target)


def test_loss_config_validation():
    with pytest.raises(LossError):
        LossConfig(lambda_dssim=-0.1)
    with pytest.raises(LossError):
        LossConfig(sobel_scales=(1, 1))
    with pytest.raises(LossError):
        LossConfig(edge_floor=-1.0)
    assert LossConfig(sobel_scales=[1, 2]).sobel_scales == (1, 2)


def test_splat_loss_examples():
    rng = np.random.default_rng(5)
    a = rng.uniform(size=(16, 16, 3))
    b = rng.uniform(size=(16, 16, 3))
    assert splat_loss(a, a) == pytest.approx(0.0, abs=1e-12)
    cfg = LossConfig(lambda_dssim=0.0, lambda_l2=0.8)
    assert splat_loss(a, b, cfg) == pytest.approx(0.8 * mse(a, b))
    assert splat_loss(a, b) == pytest.approx(0.8 * mse(a, b) + 0.2 * dssim(a, b))
    assert edge_loss(a, a) == 0.0


def test_splat_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    render = rng.uniform(0.2, 0.8, size=(14, 15, 3))
    gt = rng.uniform(0.0, 1.0, size=(14, 15, 3))
    _, grad = splat_loss_and_gradient(render, gt)
    h = 1e-5
    for _ in range(20):
        idx = tuple(int(rng.integers(0, s)) for s in render.shape)
        plus, minus = render.copy(), render.copy()
        plus[idx] += h
        minus[idx] -= h
        numeric = (splat_loss(plus, gt) - splat_loss(minus, gt)) / (2 * h)
        assert grad[idx] == pytest.approx(numeric, rel=1e-4, abs=1e-9)
