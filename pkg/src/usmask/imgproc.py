"""Dataset preprocessing: thresholding, rectangular morphology, inpainting."""

from __future__ import annotations

from enum import Enum

import numpy as np
from scipy import ndimage

from .ssim import as_gray

# 8-connectivity for hysteresis flooding; diagonal glyph strokes need it.
_CONN8 = np.ones((3, 3), dtype=bool)


class ConstantImage(ValueError):
    """Raised when an operation needs a non-degenerate histogram."""


class NoBoundaryData(ValueError):
    """Raised when an inpaint mask covers the whole image."""


class MorphOp(Enum):
    ERODE = "erode"
    DILATE = "dilate"
    OPEN = "open"
    TOP_HAT = "top_hat"


def otsu_threshold(img: np.ndarray) -> int:
    """Threshold maximizing inter-class variance; lowest level on ties.

    Classes are {pixels <= t} and {pixels > t} over the 256-bin histogram.
    """
    a = as_gray(img)
    hist = np.bincount(a.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise ConstantImage("histogram has a single occupied bin")
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    w1 = hist.sum() - w0
    sum0 = np.cumsum(hist * levels)
    mu0 = np.divide(sum0, w0, out=np.zeros(256), where=w0 > 0)
    mu1 = np.divide(sum0[-1] - sum0, w1, out=np.zeros(256), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return int(np.argmax(between))


def hysteresis_threshold(img: np.ndarray, low: int, high: int) -> np.ndarray:
    """Keep pixels >= low that are 8-connected to a seed pixel >= high."""
    a = as_gray(img)
    if not (0 <= low <= high <= 255):
        raise ValueError(f"need 0 <= low <= high <= 255, got ({low}, {high})")
    weak = a >= low
    seeds = a >= high
    labels, n = ndimage.label(weak, structure=_CONN8)
    if n == 0:
        return np.zeros_like(weak)
    seeded = np.unique(labels[seeds])
    keep = np.zeros(n + 1, dtype=bool)
    keep[seeded] = True
    keep[0] = False
    return keep[labels]


def _footprint(se_width: int, se_height: int, img_shape: tuple[int, int]) -> np.ndarray:
    if se_width < 1 or se_height < 1 or se_width % 2 == 0 or se_height % 2 == 0:
        raise ValueError(f"structuring element {se_width}x{se_height} must be odd-sized")
    if se_height > img_shape[0] or se_width > img_shape[1]:
        raise ValueError("structuring element larger than image")
    return np.ones((se_height, se_width), dtype=bool)


def morphology(
    img: np.ndarray, op: MorphOp, se_width: int, se_height: int | None = None
) -> np.ndarray:
    """Flat rectangular grayscale morphology with edge-replicated borders."""
    a = as_gray(img)
    if se_height is None:
        se_height = se_width
    fp = _footprint(se_width, se_height, a.shape)
    if op is MorphOp.ERODE:
        return ndimage.minimum_filter(a, footprint=fp, mode="nearest")
    if op is MorphOp.DILATE:
        return ndimage.maximum_filter(a, footprint=fp, mode="nearest")
    eroded = ndimage.minimum_filter(a, footprint=fp, mode="nearest")
    opened = ndimage.maximum_filter(eroded, footprint=fp, mode="nearest")
    if op is MorphOp.OPEN:
        return opened
    # Top-hat: opening is anti-extensive, so the difference cannot underflow,
    # but subtract in a wide type to keep that explicit.
    return (a.astype(np.int16) - opened.astype(np.int16)).clip(0, 255).astype(np.uint8)


def text_cleanup_mask(img: np.ndarray) -> np.ndarray:
    """Segmentation mask for small bright overlays such as burned-in text.

    Top-hat with a 7x7 rectangle isolates small-scale bright structure, a
    hysteresis pass thresholds it (low from the top-hat's own histogram
    split, high at twice that), and a 3x3 dilation recovers stroke edges.
    """
    top = morphology(img, MorphOp.TOP_HAT, 7)
    # Floor at 1: a zero split level would make every pixel a weak candidate.
    low = max(1, otsu_threshold(top))
    high = min(255, 2 * low)
    mask = hysteresis_threshold(top, low, high)
    return ndimage.maximum_filter(mask, size=3, mode="nearest")


def inpaint(
    img: np.ndarray, mask: np.ndarray, tol: float = 1e-3, max_iters: int = 500
) -> np.ndarray:
    """Fill masked pixels by neighbor-mean diffusion (discrete harmonic fill).

    Masked pixels relax toward the mean of their in-bounds 4-neighbors until
    the largest per-pixel change drops below tol or the iteration budget runs
    out. Unmasked pixels are returned bit-identical.
    """
    a = as_gray(img)
    m = np.asarray(mask, dtype=bool)
    if m.shape != a.shape:
        raise ValueError(f"mask shape {m.shape} != image shape {a.shape}")
    if m.all():
        raise NoBoundaryData("mask covers every pixel")
    if not m.any():
        return a.copy()

    work = a.astype(np.float64)
    work[m] = work[~m].mean()
    padded = np.empty((a.shape[0] + 2, a.shape[1] + 2))
    # Count of in-bounds 4-neighbors per masked pixel.
    ones = np.ones_like(work)
    po = np.zeros_like(padded)
    po[1:-1, 1:-1] = ones
    counts = (po[:-2, 1:-1] + po[2:, 1:-1] + po[1:-1, :-2] + po[1:-1, 2:])[m]

    for _ in range(max_iters):
        padded[:] = 0.0
        padded[1:-1, 1:-1] = work
        neighbor_sum = (
            padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:]
        )
        new_vals = neighbor_sum[m] / counts
        delta = np.abs(new_vals - work[m]).max()
        work[m] = new_vals
        if delta < tol:
            break

    out = a.copy()
    out[m] = np.clip(np.floor(work[m] + 0.5), 0, 255).astype(np.uint8)
    return out
