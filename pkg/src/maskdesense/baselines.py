"""Comparison desensitizers: Gaussian blurring and mosaic pixelation."""

import numpy as np
from scipy.ndimage import correlate1d

from .raster import Image


def gaussian_sigma(kernel_size):
    """Width convention when only a kernel size is given."""
    return 0.3 * ((kernel_size - 1) * 0.5 - 1) + 0.8


def gaussian_kernel(kernel_size, sigma=None):
    """1-D Gaussian taps of the given size, normalized to sum 1.

    The center sits at (kernel_size - 1) / 2, so even sizes are supported
    (half-pixel shifted); odd sizes are the canonical case.
    """
    if sigma is None:
        sigma = gaussian_sigma(kernel_size)
    center = (kernel_size - 1) / 2.0
    t = np.arange(kernel_size) - center
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(image, kernel_size):
    """Separable Gaussian blur with replicate-edge padding.

    Every output sample is a convex combination of input samples, so the
    result is clamped to the input range to keep roundoff from leaking
    outside it. Even sizes land on scipy's half-pixel placement.
    """
    if kernel_size < 1:
        raise ValueError("kernel_size must be >= 1")
    k = gaussian_kernel(kernel_size)
    out = np.empty_like(image.samples)
    for c in range(image.channels):
        tmp = correlate1d(image.samples[:, :, c], k, axis=0, mode="nearest")
        out[:, :, c] = correlate1d(tmp, k, axis=1, mode="nearest")
    lo, hi = image.samples.min(), image.samples.max()
    return Image(np.clip(out, lo, hi))


def mosaic(image, kernel_size):
    """Pixelate: every k-by-k cell replaced by its mean.

    Ragged cells at the right/bottom edges average over their actual extent,
    so k=1 and constant images pass through unchanged and the operation is
    idempotent.
    """
    if kernel_size < 1:
        raise ValueError("kernel_size must be >= 1")
    k = kernel_size
    h, w = image.height, image.width
    out = image.samples.copy()
    for y0 in range(0, h, k):
        for x0 in range(0, w, k):
            cell = out[y0 : y0 + k, x0 : x0 + k]
            mean = cell.mean(axis=(0, 1))
            # already-constant channels pass through exactly, which makes
            # the operation idempotent rather than idempotent-up-to-roundoff
            const = (cell == cell[0:1, 0:1, :]).all(axis=(0, 1))
            cell[...] = np.where(const, cell[0, 0, :], mean)
    return Image(out)
