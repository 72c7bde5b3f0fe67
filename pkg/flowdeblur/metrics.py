"""
Quality metrics: PSNR, SSIM and flow-map mean squared error.

Peak value is fixed at 1.0 (images are normalized on load). SSIM uses the
reference configuration: 11x11 Gaussian window with sigma 1.5, K1=0.01,
K2=0.03, mean over windows lying fully inside the image. Colour images are
compared on their Rec. 601 luma plane.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import correlate2d

from .errors import ParameterError, ShapeError
from .imaging import FloatArray, Image, MetricReport, MotionFlowMap

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PEAK = 1.0


def mse(a: Image, b: Image) -> float:
    a.same_shape(b)
    diff = a.data - b.data
    return float(np.mean(diff * diff))


def psnr(a: Image, b: Image) -> float:
    """
    Peak signal-to-noise ratio in decibels, peak 1.0.

    Returns ``math.inf`` when the images are identical (MSE = 0).

    Raises:
        ShapeError: if the images differ in dimensions or channels.
    """
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / err)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> FloatArray:
    """Normalized 2-D Gaussian window, separable outer product."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def ssim_map(x: FloatArray, y: FloatArray) -> FloatArray:
    """Local SSIM for every window position fully inside two ``(H, W)`` planes."""
    if x.shape != y.shape:
        raise ShapeError(f"planes differ in shape: {x.shape} vs {y.shape}")
    if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
        raise ParameterError(
            f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got "
            f"{x.shape[1]}x{x.shape[0]}"
        )
    w = gaussian_window()
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2

    mu_x = correlate2d(x, w, mode="valid")
    mu_y = correlate2d(y, w, mode="valid")
    sxx = correlate2d(x * x, w, mode="valid") - mu_x * mu_x
    syy = correlate2d(y * y, w, mode="valid") - mu_y * mu_y
    sxy = correlate2d(x * y, w, mode="valid") - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    result: FloatArray = num / den
    return result


def ssim(a: Image, b: Image) -> float:
    """
    Mean structural similarity of two same-shape images.

    Raises:
        ShapeError: if the images differ in shape.
        ParameterError: if the image is smaller than the 11x11 window.
    """
    a.same_shape(b)
    return float(np.mean(ssim_map(a.luma(), b.luma())))


def flow_mse(estimate: MotionFlowMap, label: MotionFlowMap) -> float:
    """Mean squared component error over all ``2 * width * height`` elements."""
    if (estimate.width, estimate.height) != (label.width, label.height):
        raise ShapeError(
            f"flow maps differ: {estimate.width}x{estimate.height} vs {label.width}x{label.height}",
            expected=(label.height, label.width),
            actual=(estimate.height, estimate.width),
        )
    du = estimate.u.astype(np.float64) - label.u.astype(np.float64)
    dv = estimate.v.astype(np.float64) - label.v.astype(np.float64)
    return float((np.sum(du * du) + np.sum(dv * dv)) / (2 * du.size))


def evaluate(
    restored: Image,
    reference: Image,
    flow_estimate: MotionFlowMap | None = None,
    flow_label: MotionFlowMap | None = None,
) -> MetricReport:
    """Bundle PSNR/SSIM (and flow MSE when both flows are given)."""
    fm = None
    if flow_estimate is not None and flow_label is not None:
        fm = flow_mse(flow_estimate, flow_label)
    return MetricReport(psnr=psnr(restored, reference), ssim=ssim(restored, reference), flow_mse=fm)
