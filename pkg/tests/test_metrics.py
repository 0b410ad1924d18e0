"""SSIM / dSSIM / PSNR against an independent reference implementation."""

import math

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from maskdesense.errors import SizeMismatchError
from maskdesense.metrics import dssim, psnr, ssim
from maskdesense.raster import Image


def rand_pair(rng):
    h = int(rng.integers(11, 40))
    w = int(rng.integers(11, 40))
    c = int(rng.choice([1, 3]))
    a = rng.integers(0, 256, size=(h, w, c)) / 255.0
    if rng.random() < 0.3:
        b = np.clip(a + rng.normal(0, 0.05, size=a.shape), 0.0, 1.0)
    else:
        b = rng.integers(0, 256, size=(h, w, c)) / 255.0
    return Image(a), Image(b)


def reference_ssim(a, b):
    return structural_similarity(
        a.gray() * 255.0, b.gray() * 255.0, win_size=11, gaussian_weights=True,
        sigma=1.5, use_sample_covariance=False, data_range=255)


def test_ssim_matches_reference_on_random_pairs():
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(60):
        a, b = rand_pair(rng)
        worst = max(worst, abs(ssim(a, b) - reference_ssim(a, b)))
    assert worst < 1e-6


def test_ssim_identity_is_exact():
    rng = np.random.default_rng(7)
    a = Image(rng.integers(0, 256, size=(20, 25)) / 255.0)
    assert ssim(a, a) == 1.0
    assert dssim(a, a) == 0.0


def test_ssim_symmetry_and_range():
    rng = np.random.default_rng(9)
    a, b = rand_pair(rng)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
    assert -1.0 <= ssim(a, b) <= 1.0


def test_ssim_dimension_guards():
    small = Image(np.zeros((8, 8)))
    with pytest.raises(SizeMismatchError):
        ssim(small, small)
    a = Image(np.zeros((12, 12)))
    b = Image(np.zeros((12, 13)))
    with pytest.raises(SizeMismatchError):
        ssim(a, b)


def test_psnr_constant_offset_closed_form():
    # every sample differs by exactly one 8-bit step -> MSE 1 -> 20*log10(255)
    v = np.arange(120).reshape(10, 12) % 255
    a = Image(v / 255.0)
    b = Image((v + 1) / 255.0)
    assert abs(psnr(a, b) - 20.0 * math.log10(255.0)) < 1e-9


def test_psnr_identical_is_infinite():
    a = Image(np.full((5, 5), 0.25))
    assert psnr(a, a) == math.inf


def test_psnr_known_mse():
    a = Image(np.zeros((4, 4)))
    b = Image(np.full((4, 4), 10 / 255.0))
    # MSE is 100 on the 8-bit scale
    assert psnr(a, b) == pytest.approx(10.0 * math.log10(255.0 ** 2 / 100.0), abs=1e-12)
