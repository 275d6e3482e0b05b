"""Structural similarity between grayscale frames.

Frames are numpy uint8 arrays of shape (height, width). The mean SSIM uses
Gaussian-weighted local moments evaluated only at fully interior window
positions, so the result is free of border-policy ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class SsimParams:
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    window_size: int = 11
    gaussian_sigma: float = 1.5
    downsample: int = 1

    def __post_init__(self) -> None:
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be > 0")
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 3")
        if self.downsample < 1:
            raise ValueError("downsample must be >= 1")


def as_gray(img: np.ndarray) -> np.ndarray:
    """Validate and return a (h, w) uint8 frame."""
    a = np.asarray(img)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"expected nonempty 2-D frame, got shape {a.shape}")
    if a.dtype != np.uint8:
        raise ValueError(f"expected uint8 frame, got {a.dtype}")
    return a


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian kernel, separable outer product."""
    if size < 3 or size % 2 == 0:
        raise ValueError(f"window size {size} must be odd and >= 3")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    half = size // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def downsample_mean(img: np.ndarray, factor: int) -> np.ndarray:
    """Block-mean reduction; trailing partial blocks average what is there."""
    a = as_gray(img)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return a
    h, w = a.shape
    row_edges = np.arange(0, h, factor)
    col_edges = np.arange(0, w, factor)
    sums = np.add.reduceat(np.add.reduceat(a.astype(np.float64), row_edges, axis=0),
                           col_edges, axis=1)
    row_counts = np.diff(np.append(row_edges, h))
    col_counts = np.diff(np.append(col_edges, w))
    means = sums / np.outer(row_counts, col_counts)
    return np.floor(means + 0.5).astype(np.uint8)


def _windowed_moment(a: np.ndarray, weights_1d: np.ndarray) -> np.ndarray:
    # Separable Gaussian weighting; borders are trimmed so only fully
    # interior window positions survive (valid convolution).
    half = len(weights_1d) // 2
    tmp = ndimage.correlate1d(a, weights_1d, axis=0, mode="constant")
    out = ndimage.correlate1d(tmp, weights_1d, axis=1, mode="constant")
    return out[half:-half, half:-half]


def mssim(x: np.ndarray, y: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """Mean SSIM over all interior window positions of two frames."""
    xa, ya = as_gray(x), as_gray(y)
    if xa.shape != ya.shape:
        raise ValueError(f"shape mismatch {xa.shape} vs {ya.shape}")
    if params.downsample > 1:
        xa = downsample_mean(xa, params.downsample)
        ya = downsample_mean(ya, params.downsample)
    if min(xa.shape) < params.window_size:
        raise ValueError(
            f"window {params.window_size} exceeds frame {xa.shape} after downsampling"
        )
    half = params.window_size // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(coords**2) / (2.0 * params.gaussian_sigma**2))
    g /= g.sum()
    xf = xa.astype(np.float64)
    yf = ya.astype(np.float64)

    mu_x = _windowed_moment(xf, g)
    mu_y = _windowed_moment(yf, g)
    # Tiny negative variances from floating cancellation are clamped to 0.
    var_x = np.maximum(_windowed_moment(xf * xf, g) - mu_x * mu_x, 0.0)
    var_y = np.maximum(_windowed_moment(yf * yf, g) - mu_y * mu_y, 0.0)
    cov = _windowed_moment(xf * yf, g) - mu_x * mu_y
    # Cauchy-Schwarz bound keeps |correlation| <= 1 despite floating error.
    bound = np.sqrt(var_x * var_y)
    cov = np.clip(cov, -bound, bound)

    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    ssim_map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())
