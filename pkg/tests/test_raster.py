"""Raster value types and NetPBM round-trips."""

import numpy as np
import pytest

from maskdesense.errors import (
    BadMagicError,
    MaskDomainError,
    MaxvalError,
    SizeMismatchError,
    TruncatedError,
)
from maskdesense.raster import (
    Image,
    Mask,
    apply_mask,
    downsample_mask_min,
    read_image,
    read_mask,
    write_image,
    write_mask,
    write_netpbm,
)


def rand_image(rng, h, w, c=1):
    return Image(rng.integers(0, 256, size=(h, w, c)) / 255.0)


def test_image_validation():
    with pytest.raises(SizeMismatchError):
        Image(np.zeros((4, 4, 2)))
    with pytest.raises(SizeMismatchError):
        Image(np.zeros((0, 4)))
    with pytest.raises(ValueError):
        Image(np.full((4, 4), 1.5))
    with pytest.raises(ValueError):
        Image(np.full((4, 4), np.nan))
    im = Image(np.zeros((3, 5)))
    assert (im.height, im.width, im.channels) == (3, 5, 1)
    assert not im.samples.flags.writeable


def test_mask_validation():
    with pytest.raises(ValueError):
        Mask(np.full((4, 4), 2))
    with pytest.raises(SizeMismatchError):
        Mask(np.zeros((4, 4, 1)))
    m = Mask.full(5, 3)
    assert (m.height, m.width) == (3, 5)
    assert m.bits.dtype == np.uint8


def test_gray_reduces_by_channel_mean():
    rng = np.random.default_rng(0)
    arr = rng.integers(0, 256, size=(6, 7, 3)) / 255.0
    im = Image(arr)
    assert np.allclose(im.gray(), arr.mean(axis=2))


def test_apply_mask_exact_semantics():
    rng = np.random.default_rng(1)
    im = rand_image(rng, 8, 8, 3)
    bits = rng.integers(0, 2, size=(8, 8))
    out = apply_mask(im, Mask(bits))
    keep = bits == 1
    # kept samples are bit-identical, masked ones exactly zero
    assert np.array_equal(out.samples[keep], im.samples[keep])
    assert (out.samples[~keep] == 0.0).all()
    with pytest.raises(SizeMismatchError):
        apply_mask(im, Mask.full(4, 4))


def test_downsample_mask_min_counts_partial_cells_as_masked():
    bits = np.ones((8, 8), dtype=np.uint8)
    bits[0, 3] = 0  # one masked pixel poisons its whole 4x4 cell
    small = downsample_mask_min(Mask(bits), 2, 2)
    assert small.bits.tolist() == [[0, 1], [1, 1]]
    with pytest.raises(SizeMismatchError):
        downsample_mask_min(Mask(bits), 3, 2)


@pytest.mark.parametrize("channels", [1, 3])
def test_image_roundtrip_binary(channels):
    rng = np.random.default_rng(2)
    im = rand_image(rng, 9, 13, channels)
    back = read_image(write_image(im))
    assert np.array_equal(back.samples, im.samples)


def test_image_roundtrip_ascii():
    # P2/P3 readers accept what the binary writer means
    rng = np.random.default_rng(3)
    raw = rng.integers(0, 256, size=(4, 5))
    body = " ".join(str(v) for v in raw.ravel())
    data = f"P2\n5 4\n255\n{body}\n".encode()
    im = read_image(data)
    assert np.array_equal(im.samples[:, :, 0], raw / 255.0)


def test_mask_roundtrip_and_file_convention():
    rng = np.random.default_rng(4)
    bits = rng.integers(0, 2, size=(6, 6))
    blob = write_mask(Mask(bits))
    # on disk: 255 = keep, 0 = masked
    payload = blob.split(b"\n", 3)[3]
    assert set(payload) <= {0, 255}
    back = read_mask(blob)
    assert np.array_equal(back.bits, bits)


def test_mask_reader_rejects_gray_values_and_color():
    data = b"P5\n2 2\n255\n" + bytes([0, 255, 7, 255])
    with pytest.raises(MaskDomainError):
        read_mask(data)
    rng = np.random.default_rng(5)
    color = write_image(rand_image(rng, 3, 3, 3))
    with pytest.raises(MaskDomainError):
        read_mask(color)


def test_header_errors():
    with pytest.raises(BadMagicError):
        read_image(b"P7\n1 1\n255\n\0")
    with pytest.raises(MaxvalError):
        read_image(b"P5\n1 1\n65535\n\0\0")
    with pytest.raises(TruncatedError):
        read_image(b"P5\n2 2\n255\n\0\0\0")  # one byte short
    with pytest.raises(TruncatedError):
        read_image(b"P5\n2 2\n255\n" + b"\0" * 5)  # one byte long
    with pytest.raises(TruncatedError):
        read_image(b"P2\n2 2\n255\n1 2 3 four")
    with pytest.raises(TruncatedError):
        read_image(b"P2\n2 2\n255\n1 2 3 400")


def test_write_netpbm_dispatch():
    with pytest.raises(TypeError):
        write_netpbm(np.zeros((3, 3)))
