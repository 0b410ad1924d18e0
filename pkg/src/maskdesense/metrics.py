"""Visual similarity metrics used as privacy proxies: SSIM/dSSIM and PSNR.

Both metrics work on the 8-bit dynamic range: unit-interval samples are
scaled by 255 internally, color images reduce to luminance by channel mean.
SSIM follows the standard recipe (11x11 Gaussian window, sigma 1.5,
C1=(0.01*255)^2, C2=(0.03*255)^2) and averages only fully valid windows,
i.e. the convolution is cropped rather than padded.
"""

import math

import numpy as np
from scipy.signal import convolve2d

from .errors import SizeMismatchError

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
C1 = (0.01 * 255.0) ** 2
C2 = (0.03 * 255.0) ** 2


def _gaussian_window(size=WINDOW_SIZE, sigma=WINDOW_SIGMA):
    t = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(t * t) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


_WINDOW = _gaussian_window()


def _as_8bit_gray(image):
    return image.gray() * 255.0


def _check_dims(a, b):
    if (a.height, a.width) != (b.height, b.width):
        raise SizeMismatchError(
            f"image dims differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def ssim(a, b):
    """Mean structural similarity over valid 11x11 windows.

    Identical inputs give exactly 1.0: both operands go through the same
    arithmetic, so numerator and denominator come out bitwise equal.
    """
    _check_dims(a, b)
    if a.height < WINDOW_SIZE or a.width < WINDOW_SIZE:
        raise SizeMismatchError(
            f"images must be at least {WINDOW_SIZE}x{WINDOW_SIZE} for SSIM"
        )
    x = _as_8bit_gray(a)
    y = _as_8bit_gray(b)
    w = _WINDOW
    mu_x = convolve2d(x, w, mode="valid")
    mu_y = convolve2d(y, w, mode="valid")
    var_x = convolve2d(x * x, w, mode="valid") - mu_x * mu_x
    var_y = convolve2d(y * y, w, mode="valid") - mu_y * mu_y
    cov = convolve2d(x * y, w, mode="valid") - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + C1) * (2.0 * cov + C2)
    den = (mu_x * mu_x + mu_y * mu_y + C1) * (var_x + var_y + C2)
    return float((num / den).mean())


def dssim(a, b):
    """1 - ssim: higher means the pair looks less alike (more privacy)."""
    return 1.0 - ssim(a, b)


def psnr(a, b):
    """Peak signal-to-noise ratio in dB on the 8-bit scale; +inf if identical."""
    _check_dims(a, b)
    if a.channels != b.channels:
        raise SizeMismatchError("channel counts differ")
    diff = (a.samples - b.samples) * 255.0
    mse = float((diff * diff).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 * 255.0 / mse)
