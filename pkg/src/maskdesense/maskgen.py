"""Free-form random mask generation and mask-ratio accounting.

Masks are built from brush strokes: each stroke starts at a uniform random
point, walks a random polyline (per-vertex heading perturbation, random
segment lengths), and is rasterized by stamping filled discs of radius
width/2 at unit steps along every segment plus a disc at every vertex.

Randomness comes from numpy's Philox counter-based 64-bit generator so that
masks replay bit-identically for a given (params, dims, seed) on any
platform. Rasterization decisions are integer disc tests (dx^2 + dy^2 <= r^2)
against rounded stamp centers.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BandUnreachableError, OutOfBandError, SizeMismatchError
from .raster import Mask

#: The six mask-ratio bands used for coverage levels, low ratio to high.
RATIO_BANDS = ((0.01, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5), (0.5, 0.6))


def _default_min_width(max_brush_width):
    return min(max_brush_width, max(2.0, max_brush_width / 3.0))


@dataclass(frozen=True)
class BrushParams:
    """Hyper-parameters of one free-form mask draw.

    ``min_vertices``/``max_vertices`` bound the per-stroke vertex count,
    ``max_length`` bounds segment length, ``max_brush_width`` bounds stroke
    width, and ``max_angle`` bounds the per-vertex heading perturbation
    (radians). ``strokes`` and ``min_brush_width`` control overall coverage;
    ``min_brush_width`` defaults to min(b, max(2, b/3)) for brush width b.
    """

    min_vertices: int
    max_vertices: int
    max_length: float
    max_brush_width: float
    max_angle: float
    strokes: int = 4
    min_brush_width: float = None

    def __post_init__(self):
        if self.min_brush_width is None:
            object.__setattr__(self, "min_brush_width", _default_min_width(self.max_brush_width))
        if not 0 <= self.min_vertices <= self.max_vertices:
            raise ValueError(f"need 0 <= min_vertices <= max_vertices, got {self}")
        if self.max_length <= 0:
            raise ValueError("max_length must be positive")
        if not 0 < self.min_brush_width <= self.max_brush_width:
            raise ValueError(f"need 0 < min_brush_width <= max_brush_width, got {self}")
        if not 0 <= self.max_angle <= math.pi:
            raise ValueError("max_angle must lie in [0, pi]")
        if self.strokes < 1:
            raise ValueError("strokes must be >= 1")

    def to_dict(self):
        return {
            "min_vertices": self.min_vertices,
            "max_vertices": self.max_vertices,
            "max_length": self.max_length,
            "max_brush_width": self.max_brush_width,
            "max_angle": self.max_angle,
            "strokes": self.strokes,
            "min_brush_width": self.min_brush_width,
        }


@dataclass(frozen=True)
class BrushRanges:
    """Inclusive per-field ranges from which BrushParams are drawn."""

    min_vertices: tuple = (0, 4)
    max_vertices: tuple = (4, 14)
    max_length: tuple = (6.0, 36.0)
    max_brush_width: tuple = (4.0, 22.0)
    max_angle: tuple = (0.8, 2.8)
    strokes: tuple = (1, 14)
    min_brush_width: tuple = (2.0, 5.0)

    def __post_init__(self):
        for name in ("min_vertices", "max_vertices", "max_length", "max_brush_width",
                     "max_angle", "strokes", "min_brush_width"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"range for {name} is empty: ({lo}, {hi})")
        if self.min_vertices[0] < 0 or self.strokes[0] < 1:
            raise ValueError("vertex counts must be >= 0 and strokes >= 1")
        if self.max_length[0] <= 0 or self.min_brush_width[0] <= 0:
            raise ValueError("lengths and brush widths must be positive")
        if not 0 <= self.max_angle[0] <= self.max_angle[1] <= math.pi:
            raise ValueError("max_angle range must lie within [0, pi]")

    @classmethod
    def from_dict(cls, d):
        kwargs = {k: tuple(v) for k, v in d.items()}
        return cls(**kwargs)

    def to_dict(self):
        return {
            "min_vertices": list(self.min_vertices),
            "max_vertices": list(self.max_vertices),
            "max_length": list(self.max_length),
            "max_brush_width": list(self.max_brush_width),
            "max_angle": list(self.max_angle),
            "strokes": list(self.strokes),
            "min_brush_width": list(self.min_brush_width),
        }

    def draw(self, rng):
        """Draw one BrushParams from these ranges using ``rng``."""
        v0 = int(rng.integers(self.min_vertices[0], self.min_vertices[1], endpoint=True))
        v1 = int(rng.integers(self.max_vertices[0], self.max_vertices[1], endpoint=True))
        v1 = max(v0, v1)
        max_length = float(rng.uniform(*self.max_length))
        brush = float(rng.uniform(*self.max_brush_width))
        angle = float(rng.uniform(*self.max_angle))
        strokes = int(rng.integers(self.strokes[0], self.strokes[1], endpoint=True))
        min_brush = min(float(rng.uniform(*self.min_brush_width)), brush)
        return BrushParams(
            min_vertices=v0,
            max_vertices=v1,
            max_length=max_length,
            max_brush_width=brush,
            max_angle=angle,
            strokes=strokes,
            min_brush_width=min_brush,
        )


@dataclass(frozen=True)
class Stroke:
    """One brush stroke: a polyline of float (x, y) points and a brush width."""

    points: tuple
    brush_width: float


def sample_strokes(params, width, height, rng):
    """Draw the stroke geometry for one mask from ``rng``.

    Per stroke: vertex count uniform in [min_vertices, max_vertices] (a count
    of zero skips the stroke entirely), start uniform over the image, brush
    width uniform in [min_brush_width, max_brush_width], initial heading
    uniform in [0, 2pi); each subsequent vertex perturbs the heading by a
    delta uniform in [-max_angle, +max_angle] and advances by a length in
    (0, max_length]. Strokes may leave the image; rasterization clips.
    """
    strokes = []
    for _ in range(params.strokes):
        nv = int(rng.integers(params.min_vertices, params.max_vertices, endpoint=True))
        if nv == 0:
            continue
        x = float(rng.uniform(0.0, width))
        y = float(rng.uniform(0.0, height))
        brush = float(rng.uniform(params.min_brush_width, params.max_brush_width))
        heading = float(rng.uniform(0.0, 2.0 * math.pi))
        points = [(x, y)]
        for _ in range(nv):
            heading += float(rng.uniform(-params.max_angle, params.max_angle))
            seg = params.max_length - float(rng.uniform(0.0, params.max_length))
            x += seg * math.cos(heading)
            y += seg * math.sin(heading)
            points.append((x, y))
        strokes.append(Stroke(points=tuple(points), brush_width=brush))
    return strokes


def stamp_centers(stroke):
    """Disc stamp centers for one stroke: every vertex plus unit steps."""
    centers = list(stroke.points)
    for (x0, y0), (x1, y1) in zip(stroke.points, stroke.points[1:]):
        length = math.hypot(x1 - x0, y1 - y0)
        steps = int(math.floor(length))
        if steps >= 1 and length > 0:
            ux = (x1 - x0) / length
            uy = (y1 - y0) / length
            for k in range(1, steps + 1):
                centers.append((x0 + k * ux, y0 + k * uy))
    return centers


def _disc_offsets(radius):
    ri = int(math.floor(radius))
    span = np.arange(-ri, ri + 1)
    dx, dy = np.meshgrid(span, span)
    return (dx * dx + dy * dy) <= radius * radius


def rasterize_strokes(strokes, width, height):
    """Render strokes into a (height, width) uint8 array of masked pixels (1 = hit)."""
    hit = np.zeros((height, width), dtype=bool)
    for stroke in strokes:
        radius = stroke.brush_width / 2.0
        disc = _disc_offsets(radius)
        ri = disc.shape[0] // 2
        for cx, cy in stamp_centers(stroke):
            ix = int(math.floor(cx + 0.5))
            iy = int(math.floor(cy + 0.5))
            y0, y1 = iy - ri, iy + ri + 1
            x0, x1 = ix - ri, ix + ri + 1
            cy0, cy1 = max(y0, 0), min(y1, height)
            cx0, cx1 = max(x0, 0), min(x1, width)
            if cy0 >= cy1 or cx0 >= cx1:
                continue
            sub = disc[cy0 - y0 : cy1 - y0, cx0 - x0 : cx1 - x0]
            hit[cy0:cy1, cx0:cx1] |= sub
    return hit.astype(np.uint8)


def _mask_from_rng(params, width, height, rng):
    strokes = sample_strokes(params, width, height, rng)
    hit = rasterize_strokes(strokes, width, height)
    return Mask(1 - hit)


def random_mask(params, width, height, seed):
    """Generate a keep-convention mask; deterministic in (params, dims, seed)."""
    if width < 1 or height < 1:
        raise SizeMismatchError("mask dimensions must be positive")
    rng = np.random.Generator(np.random.Philox(key=seed))
    return _mask_from_rng(params, width, height, rng)


def draw_candidate(ranges, width, height, seed):
    """Draw hyper-parameters from ``ranges`` and a mask from them, one stream.

    Returns (mask, params); deterministic in (ranges, dims, seed).
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    params = ranges.draw(rng)
    return _mask_from_rng(params, width, height, rng), params


def combine(random_part, template):
    """Merge a random mask with the critical template: template pixels stay visible.

    Output bit is max(random bit, template bit), so no pixel the template
    marks critical is ever masked.
    """
    if (random_part.height, random_part.width) != (template.height, template.width):
        raise SizeMismatchError(
            f"mask {random_part.width}x{random_part.height} vs "
            f"template {template.width}x{template.height}"
        )
    return Mask(np.maximum(random_part.bits, template.bits))


def masked_ratio(mask):
    """Fraction of masked (bit 0) pixels, as an exact count over h*w."""
    area = mask.height * mask.width
    kept = int(mask.bits.sum())
    return (area - kept) / area


def mask_level(mask):
    """Coverage level 1..6 for masked ratios in (0.01, 0.6].

    Level k covers ratios in (0.1*(k-1), 0.1*k], with the first band starting
    above 0.01. Ratios outside (0.01, 0.6] raise ValueError.
    """
    area = mask.height * mask.width
    masked = area - int(mask.bits.sum())
    if masked * 100 <= area or masked * 10 > 6 * area:
        raise OutOfBandError(
            f"masked ratio {masked / area:.4f} outside the level bands (0.01, 0.6]"
        )
    return max(1, -(-10 * masked // area))


def random_mask_in_band(ranges, band, width, height, seed, max_attempts=200):
    """Rejection-sample a mask whose masked ratio lies in ``band`` = (lo, hi).

    Attempt t draws fresh BrushParams from ``ranges`` and a fresh mask using
    the Philox stream keyed by ``seed`` with counter t * 2^64, so every
    attempt is deterministic and independent. Returns (mask, params);
    raises BandUnreachableError after ``max_attempts`` misses.
    """
    lo, hi = band
    if not 0 <= lo < hi <= 1:
        raise ValueError(f"band must satisfy 0 <= lo < hi <= 1, got {band}")
    for attempt in range(max_attempts):
        rng = np.random.Generator(np.random.Philox(key=seed, counter=attempt << 64))
        params = ranges.draw(rng)
        mask = _mask_from_rng(params, width, height, rng)
        if lo <= masked_ratio(mask) <= hi:
            return mask, params
    raise BandUnreachableError(
        f"no mask with ratio in [{lo}, {hi}] after {max_attempts} attempts (seed {seed})"
    )
