"""Image and volume quality metrics: PSNR, SSIM, IoU."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lainr.errors import ShapeError

PSNR_CEILING = 200.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(pred, ref, peak=1.0):
    """Peak signal-to-noise ratio in dB, capped at ``PSNR_CEILING`` when the MSE is 0."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ShapeError(f"psnr shape mismatch: {pred.shape} vs {ref.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((pred - ref) ** 2))
    if mse == 0.0:
        return PSNR_CEILING
    return min(PSNR_CEILING, 10.0 * math.log10(peak * peak / mse))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    # separable 'valid' correlation with a symmetric kernel
    rows = sliding_window_view(img, g.size, axis=0) @ g
    return sliding_window_view(rows, g.size, axis=1) @ g


def _ssim_channel(x, y, g, data_range):
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(pred, ref, data_range=1.0):
    """Mean structural similarity over all valid 11x11 Gaussian windows (sigma 1.5).

    Colour images (H, W, C) are scored per channel and averaged.
    """
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(ref, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"ssim shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    if x.ndim != 3:
        raise ShapeError(f"ssim expects (H, W) or (H, W, C) images, got {x.shape}")
    if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
        raise ShapeError(f"image {x.shape[:2]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = gaussian_window()
    return float(np.mean([_ssim_channel(x[..., c], y[..., c], g, data_range) for c in range(x.shape[2])]))


def iou(pred, ref, threshold=0.5):
    """Intersection over union after thresholding both volumes (``>= threshold``).

    Two empty volumes score 1.0.
    """
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    if pred.shape != ref.shape:
        raise ShapeError(f"iou shape mismatch: {pred.shape} vs {ref.shape}")
    a = pred >= threshold
    b = ref >= threshold
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union
