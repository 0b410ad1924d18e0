"""Saliency maps, their aggregation, and binarization into a critical template.

A saliency provider is anything with an ``input_gradient(image)`` method
returning d(max logit)/d(input) as a (C, H, W) array; the recognition model
implements it, and file-backed maps can stand in when a model is unavailable.
The critical template marks pixels the mask search must keep visible.
"""

import numpy as np
from dataclasses import dataclass
from scipy.ndimage import uniform_filter

from .errors import SizeMismatchError
from .raster import Image, Mask, load_image, save


class SaliencyMap:
    """Per-pixel importance in [0,1], same dims as the source image."""

    __slots__ = ("values",)

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise SizeMismatchError(f"saliency map must be 2-D, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("saliency map contains non-finite values")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("saliency values must lie in [0, 1]")
        values = values.copy()
        values.flags.writeable = False
        self.values = values

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class MsmConfig:
    """Mean-saliency aggregation settings: sample count K, threshold T, smoothing."""

    K: int = 64
    T: float = 0.5
    smoothing_radius: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0.0 < self.T < 1.0:
            raise ValueError("T must lie strictly inside (0, 1)")
        if self.smoothing_radius < 0:
            raise ValueError("smoothing_radius must be >= 0")


def gradient_saliency(model, image):
    """Input-gradient saliency: |d(max logit)/dx| summed over channels.

    The result is max-normalized to [0,1]; a model whose output ignores the
    input yields an all-zero map rather than dividing by zero.
    """
    grad = np.asarray(model.input_gradient(image), dtype=np.float64)
    if grad.ndim == 2:
        grad = grad[None, :, :]
    if grad.shape[1:] != (image.height, image.width):
        raise SizeMismatchError(
            f"gradient shape {grad.shape} does not match image "
            f"{image.width}x{image.height}"
        )
    mag = np.abs(grad).sum(axis=0)
    peak = mag.max()
    if peak > 0.0:
        mag = mag / peak
    return SaliencyMap(mag)


def mean_saliency(maps):
    """Element-wise arithmetic mean of saliency maps, in index order."""
    if len(maps) == 0:
        raise ValueError("need at least one saliency map")
    first = maps[0]
    acc = np.zeros_like(first.values)
    for m in maps:
        if (m.height, m.width) != (first.height, first.width):
            raise SizeMismatchError("saliency maps disagree on dimensions")
        acc = acc + m.values
    return SaliencyMap(acc / len(maps))


def _box_smooth(values, radius):
    # coverage-normalized box mean: border windows divide by the pixels
    # actually inside the image, not the full window area
    size = 2 * radius + 1
    num = uniform_filter(values, size=size, mode="constant", cval=0.0)
    den = uniform_filter(np.ones_like(values), size=size, mode="constant", cval=0.0)
    return num / den


def binarize(msm, cfg):
    """Threshold the mean saliency map into a keep-convention template.

    Optional box smoothing (radius ``cfg.smoothing_radius``) runs first; a
    pixel is kept iff its value exceeds ``cfg.T`` strictly, so raising T can
    only shrink the template.
    """
    values = msm.values
    if cfg.smoothing_radius > 0:
        values = _box_smooth(values, cfg.smoothing_radius)
    return Mask((values > cfg.T).astype(np.uint8))


def build_template(model, images, cfg):
    """Saliency over up to ``cfg.K`` images, averaged and binarized.

    Returns (template, mean_map) so callers can persist both.
    """
    chosen = images[: cfg.K]
    maps = [gradient_saliency(model, img) for img in chosen]
    msm = mean_saliency(maps)
    return binarize(msm, cfg), msm


def load_saliency(path):
    """Read a precomputed map from a grayscale NetPBM file (values v/255)."""
    return SaliencyMap(load_image(path).gray())


def save_saliency(smap, path):
    save(Image(smap.values), path)
