"""Saliency aggregation and template binarization with stub providers."""

import numpy as np
import pytest

from maskdesense.errors import SizeMismatchError
from maskdesense.raster import Image
from maskdesense.saliency import (
    MsmConfig,
    SaliencyMap,
    binarize,
    build_template,
    gradient_saliency,
    load_saliency,
    mean_saliency,
    save_saliency,
)


class StubProvider:
    """Returns a fixed gradient array regardless of the image."""

    def __init__(self, grad):
        self.grad = grad
        self.calls = 0

    def input_gradient(self, image):
        self.calls += 1
        return self.grad


IMG = Image(np.zeros((4, 4)))


def test_map_validation():
    with pytest.raises(SizeMismatchError):
        SaliencyMap(np.zeros((2, 2, 1)))
    with pytest.raises(ValueError):
        SaliencyMap(np.full((2, 2), 1.5))
    with pytest.raises(ValueError):
        SaliencyMap(np.full((2, 2), np.nan))


def test_msm_config_validation():
    with pytest.raises(ValueError):
        MsmConfig(K=0)
    with pytest.raises(ValueError):
        MsmConfig(T=1.0)
    with pytest.raises(ValueError):
        MsmConfig(smoothing_radius=-1)


def test_gradient_saliency_sums_channels_and_normalizes():
    g = np.zeros((3, 4, 4))
    g[0, 1, 2] = 3.0
    g[1, 1, 2] = -1.0  # magnitudes add across channels
    g[2, 0, 0] = 2.0
    smap = gradient_saliency(StubProvider(g), IMG)
    assert smap.values[1, 2] == 1.0
    assert smap.values[0, 0] == 0.5
    assert smap.values[3, 3] == 0.0


def test_gradient_saliency_zero_gradient_is_zero_map():
    smap = gradient_saliency(StubProvider(np.zeros((1, 4, 4))), IMG)
    assert (smap.values == 0.0).all()


def test_gradient_saliency_shape_guard():
    with pytest.raises(SizeMismatchError):
        gradient_saliency(StubProvider(np.zeros((1, 5, 5))), IMG)


def test_mean_saliency_is_plain_mean():
    rng = np.random.default_rng(0)
    stack = rng.random((5, 6, 6))
    maps = [SaliencyMap(v) for v in stack]
    assert np.allclose(mean_saliency(maps).values, stack.mean(axis=0))
    with pytest.raises(ValueError):
        mean_saliency([])
    with pytest.raises(SizeMismatchError):
        mean_saliency([maps[0], SaliencyMap(np.zeros((3, 3)))])


def test_binarize_strict_threshold():
    values = np.array([[0.2, 0.5], [0.500000001, 0.9]])
    tmpl = binarize(SaliencyMap(values), MsmConfig(T=0.5))
    assert tmpl.bits.tolist() == [[0, 0], [1, 1]]


def test_binarize_antitone_in_t():
    rng = np.random.default_rng(1)
    msm = SaliencyMap(rng.random((12, 12)))
    prev = None
    for t in (0.1, 0.3, 0.5, 0.7, 0.9):
        kept = binarize(msm, MsmConfig(T=t)).bits
        if prev is not None:
            # raising T can only turn bits off
            assert (kept <= prev).all()
        prev = kept


def test_binarize_smoothing_matches_coverage_oracle():
    rng = np.random.default_rng(2)
    values = rng.random((7, 9))
    r = 1
    want = np.zeros_like(values)
    for y in range(7):
        for x in range(9):
            win = values[max(0, y - r) : y + r + 1, max(0, x - r) : x + r + 1]
            want[y, x] = win.mean()  # border windows use the real coverage
    got = binarize(SaliencyMap(values), MsmConfig(T=0.5, smoothing_radius=r))
    assert np.array_equal(got.bits, (want > 0.5).astype(np.uint8))


def test_build_template_caps_at_k():
    stub = StubProvider(np.ones((1, 4, 4)))
    template, msm = build_template(stub, [IMG] * 10, MsmConfig(K=3, T=0.5))
    assert stub.calls == 3
    assert (msm.values == 1.0).all()
    assert (template.bits == 1).all()


def test_saliency_file_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    values = rng.random((5, 5))
    path = tmp_path / "map.pgm"
    save_saliency(SaliencyMap(values), path)
    back = load_saliency(path)
    assert np.allclose(back.values, np.round(values * 255.0) / 255.0, atol=1e-12)
