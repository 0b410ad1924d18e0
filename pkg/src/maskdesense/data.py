"""Dataset loading, the bundled synthetic identity set, and pair sampling.

On-disk format: a directory with ``labels.tsv`` (relative image path, TAB,
integer class id, one per line) and NetPBM images of equal dimensions. Color
images reduce to luminance on load; the networks are grayscale.

The synthetic set provides face-like 64x64 identities at desk scale: every
class shares the same oval layout (so saliency concentrates on common
structure) and carries its identity in a small glyph repeated on a 3x3 grid
spanning the frame. Spreading the evidence keeps partial occlusion graded:
covering more of the image removes proportionally more of the identity signal
instead of toggling a single decisive region. Per-sample jitter, intensity
scaling and noise make recognition a learning problem rather than a lookup.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError
from .raster import Image, load_image, save

SYNTH_BACKGROUND = 0.12


@dataclass
class Dataset:
    images: np.ndarray  # (N, 1, H, W) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64
    paths: list = None

    def __len__(self):
        return len(self.labels)

    @property
    def side(self):
        return self.images.shape[2]

    def image(self, i):
        """Row i as a raster Image value."""
        return Image(self.images[i, 0].astype(np.float64))

    def subset(self, indices):
        indices = np.asarray(indices)
        paths = [self.paths[i] for i in indices] if self.paths else None
        return Dataset(self.images[indices], self.labels[indices], paths)


def load_dataset(directory):
    """Read a labels.tsv dataset directory."""
    labels_path = os.path.join(directory, "labels.tsv")
    if not os.path.isfile(labels_path):
        raise DatasetError(f"no labels.tsv in {directory}")
    rows = []
    with open(labels_path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"labels.tsv line {ln}: expected 'path<TAB>class'")
            try:
                cid = int(parts[1])
            except ValueError:
                raise DatasetError(f"labels.tsv line {ln}: class id {parts[1]!r} not an integer")
            if cid < 0:
                raise DatasetError(f"labels.tsv line {ln}: negative class id")
            rows.append((parts[0], cid))
    if not rows:
        raise DatasetError(f"{directory} lists no images")
    images, labels, paths = [], [], []
    dims = None
    for rel, cid in rows:
        img = load_image(os.path.join(directory, rel))
        if dims is None:
            dims = (img.height, img.width)
        elif (img.height, img.width) != dims:
            raise DatasetError(f"{rel}: dims {img.width}x{img.height} differ from {dims[1]}x{dims[0]}")
        images.append(img.gray().astype(np.float32))
        labels.append(cid)
        paths.append(rel)
    return Dataset(np.stack(images)[:, None], np.asarray(labels, dtype=np.int64), paths)


def save_dataset(dataset, directory, prefix="img"):
    """Write images + labels.tsv; returns the directory."""
    os.makedirs(directory, exist_ok=True)
    lines = []
    width = len(str(len(dataset) - 1))
    for i in range(len(dataset)):
        rel = f"{prefix}{i:0{width}d}.pgm"
        save(dataset.image(i), os.path.join(directory, rel))
        lines.append(f"{rel}\t{int(dataset.labels[i])}")
    with open(os.path.join(directory, "labels.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return directory


def _stream(seed, index):
    return np.random.Generator(np.random.Philox(key=seed, counter=index << 64))


def _ellipse(side):
    yy, xx = np.mgrid[0:side, 0:side]
    cy = cx = (side - 1) / 2.0
    return ((xx - cx) / (0.32 * side)) ** 2 + ((yy - cy) / (0.42 * side)) ** 2 <= 1.0


def _vignette(side):
    """Radial falloff toward the corners, near-black at the extremes."""
    yy, xx = np.mgrid[0:side, 0:side]
    c = (side - 1) / 2.0
    r2 = ((yy - c) ** 2 + (xx - c) ** 2) / (2.0 * c * c)
    return 1.0 - 0.85 * r2


def _paste(canvas, patch, cy, cx):
    h, w = patch.shape
    y0, x0 = cy - h // 2, cx - w // 2
    sy0, sx0 = max(0, -y0), max(0, -x0)
    y0, x0 = max(0, y0), max(0, x0)
    y1 = min(canvas.shape[0], y0 + h - sy0)
    x1 = min(canvas.shape[1], x0 + w - sx0)
    canvas[y0:y1, x0:x1] = patch[sy0 : sy0 + y1 - y0, sx0 : sx0 + x1 - x0]


def _glyphs(classes, seed):
    """Distinct 8x8 identity glyphs, one per class, from 4x4 bit codes."""
    seen = set()
    out = []
    for c in range(classes):
        crng = _stream(seed, c)
        while True:
            bits = crng.integers(0, 2, size=(4, 4))
            key = tuple(bits.ravel().tolist())
            if key not in seen:
                seen.add(key)
                break
        out.append(np.kron(bits.astype(np.float64), np.ones((2, 2))) * 0.40 + 0.55)
    return out


def synth_dataset(classes=10, per_class=48, side=64, seed=0):
    """Deterministic synthetic identity set, class-major sample order."""
    ell = _ellipse(side)
    vig = _vignette(side)
    yy, xx = np.mgrid[0:side, 0:side]
    cell = side // 3
    centers = [cell // 2 + i * cell for i in range(3)]
    grid = [(gy, gx) for gy in centers for gx in centers]
    glyphs = _glyphs(classes, seed)
    images = np.empty((classes * per_class, 1, side, side), dtype=np.float32)
    labels = np.empty(classes * per_class, dtype=np.int64)
    row = 0
    for c in range(classes):
        for k in range(per_class):
            srng = _stream(seed, classes + c * per_class + k)
            canvas = np.full((side, side), SYNTH_BACKGROUND)
            canvas[ell] = 0.20
            dy, dx = (int(v) for v in srng.integers(-2, 3, size=2))
            contrast = srng.uniform(0.90, 1.10, size=len(grid))
            for (gy, gx), cs in zip(grid, contrast):
                cy = min(max(gy + dy, 0), side - 1)
                cx = min(max(gx + dx, 0), side - 1)
                base = canvas[cy, cx]
                _paste(canvas, base + (glyphs[c] - base) * cs, gy + dy, gx + dx)
            for _ in range(3):  # clutter: dark discs may occlude glyphs
                py, px = (int(v) for v in srng.integers(0, side, size=2))
                rad = srng.uniform(3.0, 7.0)
                val = srng.uniform(0.0, 0.25)
                canvas[(yy - py) ** 2 + (xx - px) ** 2 <= rad * rad] = val
            canvas *= vig
            scale = srng.uniform(0.85, 1.15)
            canvas = canvas * scale + srng.normal(0.0, 0.03, size=(side, side))
            images[row, 0] = np.clip(canvas, 0.0, 1.0)
            labels[row] = c
            row += 1
    return Dataset(images, labels)


def synth_splits(classes=10, train_per_class=48, test_per_class=16, side=64, seed=0):
    """One synthetic set split class-wise into train and test parts."""
    full = synth_dataset(classes, train_per_class + test_per_class, side, seed)
    per = train_per_class + test_per_class
    idx = np.arange(len(full)).reshape(classes, per)
    train = full.subset(idx[:, :train_per_class].ravel())
    test = full.subset(idx[:, train_per_class:].ravel())
    return train, test


def sample_pairs(dataset, n_pairs, seed=0):
    """Balanced verification pairs: (i, j, same_identity) index triples."""
    labels = dataset.labels
    classes = np.unique(labels)
    if len(dataset) < 4 or len(classes) < 2:
        raise DatasetError("need at least two classes and four images for pairs")
    by_class = {int(c): np.flatnonzero(labels == c) for c in classes}
    multi = np.asarray([c for c in classes if len(by_class[int(c)]) >= 2])
    if len(multi) == 0:
        raise DatasetError("no class has two images, cannot form same-identity pairs")
    rng = np.random.Generator(np.random.Philox(key=seed))
    pairs = []
    for p in range(n_pairs):
        if p % 2 == 0:
            c = int(multi[rng.integers(len(multi))])
            i, j = rng.choice(by_class[c], size=2, replace=False)
            pairs.append((int(i), int(j), True))
        else:
            ca, cb = rng.choice(classes, size=2, replace=False)
            i = rng.choice(by_class[int(ca)])
            j = rng.choice(by_class[int(cb)])
            pairs.append((int(i), int(j), False))
    return pairs
