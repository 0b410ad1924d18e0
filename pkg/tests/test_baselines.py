"""Blur and mosaic baselines against explicit per-pixel oracles."""

import numpy as np
import pytest

from maskdesense.baselines import gaussian_blur, gaussian_kernel, gaussian_sigma, mosaic
from maskdesense.raster import Image


def clamped_blur_oracle(samples, k):
    """2-D correlation with the outer-product kernel and replicated edges."""
    h, w, c = samples.shape
    n = len(k)
    ctr = (n - 1) / 2.0
    out = np.zeros_like(samples)
    for y in range(h):
        for x in range(w):
            for i in range(n):
                for j in range(n):
                    sy = min(max(int(round(y + i - ctr)), 0), h - 1)
                    sx = min(max(int(round(x + j - ctr)), 0), w - 1)
                    out[y, x] += k[i] * k[j] * samples[sy, sx]
    return out


def mosaic_oracle(samples, k):
    h, w, _ = samples.shape
    out = samples.copy()
    for y0 in range(0, h, k):
        for x0 in range(0, w, k):
            cell = samples[y0 : y0 + k, x0 : x0 + k]
            out[y0 : y0 + k, x0 : x0 + k] = cell.mean(axis=(0, 1))
    return out


def test_sigma_convention():
    assert gaussian_sigma(9) == pytest.approx(1.7)
    assert gaussian_sigma(19) == pytest.approx(3.2)


def test_kernel_normalized_and_symmetric():
    for size in (3, 9, 11):
        k = gaussian_kernel(size)
        assert k.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.allclose(k, k[::-1])
        assert k.argmax() == size // 2


def test_blur_matches_dense_oracle():
    rng = np.random.default_rng(5)
    for size in (3, 5, 9):
        arr = rng.integers(0, 256, size=(10, 13, 1)) / 255.0
        got = gaussian_blur(Image(arr), size).samples
        want = clamped_blur_oracle(arr, gaussian_kernel(size))
        assert np.allclose(got, want, atol=1e-10)


def test_blur_constant_passes_through_exactly():
    im = Image(np.full((9, 9), 0.37))
    assert np.array_equal(gaussian_blur(im, 9).samples, im.samples)


def test_blur_identity_and_range():
    rng = np.random.default_rng(6)
    arr = rng.integers(0, 256, size=(12, 12, 3)) / 255.0
    im = Image(arr)
    assert np.allclose(gaussian_blur(im, 1).samples, arr)
    out = gaussian_blur(im, 19).samples
    assert out.min() >= arr.min() and out.max() <= arr.max()
    with pytest.raises(ValueError):
        gaussian_blur(im, 0)


def test_mosaic_matches_cell_mean_oracle():
    rng = np.random.default_rng(7)
    # 11x14 forces ragged cells on both edges for k=4
    arr = rng.integers(0, 256, size=(11, 14, 3)) / 255.0
    for k in (2, 4, 8):
        got = mosaic(Image(arr), k).samples
        assert np.allclose(got, mosaic_oracle(arr, k), atol=1e-12)


def test_mosaic_identity_and_global_mean():
    rng = np.random.default_rng(8)
    arr = rng.integers(0, 256, size=(6, 6, 1)) / 255.0
    assert np.array_equal(mosaic(Image(arr), 1).samples, arr)
    big = mosaic(Image(arr), 6).samples
    assert np.allclose(big, arr.mean(axis=(0, 1)))
    with pytest.raises(ValueError):
        mosaic(Image(arr), 0)


def test_mosaic_is_exactly_idempotent():
    rng = np.random.default_rng(9)
    arr = rng.integers(0, 256, size=(10, 10, 1)) / 255.0
    once = mosaic(Image(arr), 3)
    twice = mosaic(once, 3)
    assert np.array_equal(once.samples, twice.samples)


def test_mosaic_keeps_constant_cells_bit_exact():
    arr = np.full((8, 8, 1), 0.1234567890123)
    arr[4:, 4:, 0] = 0.77
    out = mosaic(Image(arr), 4)
    assert np.array_equal(out.samples[:4, :4], arr[:4, :4])
    assert np.array_equal(out.samples[4:, 4:], arr[4:, 4:])
