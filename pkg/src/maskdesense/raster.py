"""Image and mask value types plus deterministic NetPBM I/O.

Conventions used throughout the toolkit:

* images hold float samples in [0, 1], shape (height, width, channels),
  channels 1 or 3; 8-bit files are normalized by v/255 on load;
* masks are binary, keep-convention: bit 1 = pixel visible, bit 0 = masked;
* masks persist as grayscale NetPBM where 0 = masked and 255 = keep;
* canonical files are binary (P5/P6) with a single whitespace-separated
  header ``magic width height maxval`` and maxval 255.

Both types are immutable after construction (backing arrays are marked
read-only) and safe to share between threads.
"""

import numpy as np

from .errors import (
    BadMagicError,
    MaskDomainError,
    MaxvalError,
    SizeMismatchError,
    TruncatedError,
)


class Image:
    """A raster of float samples in [0, 1].

    Args:
        samples: array of shape (height, width) or (height, width, channels)
            with channels 1 or 3; values must lie in [0, 1].
    """

    __slots__ = ("samples",)

    def __init__(self, samples):
        arr = np.asarray(samples, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise SizeMismatchError(
                f"image must be (h, w) or (h, w, c) with c in {{1, 3}}, got shape {arr.shape}"
            )
        if arr.size == 0:
            raise SizeMismatchError("image must be non-empty")
        if not np.isfinite(arr).all():
            raise ValueError("image samples must be finite")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"image samples must lie in [0, 1], got range [{lo}, {hi}]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self.samples = arr

    @property
    def height(self):
        return self.samples.shape[0]

    @property
    def width(self):
        return self.samples.shape[1]

    @property
    def channels(self):
        return self.samples.shape[2]

    def gray(self):
        """Single-channel view as a (h, w) array; color reduces by channel mean."""
        if self.channels == 1:
            return self.samples[:, :, 0]
        return self.samples.mean(axis=2)

    def chw(self, dtype=np.float32):
        """Samples as a (channels, height, width) array for network input."""
        return np.ascontiguousarray(self.samples.transpose(2, 0, 1), dtype=dtype)

    def __repr__(self):
        return f"Image({self.width}x{self.height}x{self.channels})"


class Mask:
    """A binary keep-convention mask: 1 = visible, 0 = masked."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        arr = np.asarray(bits)
        if arr.ndim != 2 or arr.size == 0:
            raise SizeMismatchError(f"mask must be a non-empty (h, w) array, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("mask bits must be 0 or 1")
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        arr.flags.writeable = False
        self.bits = arr

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    @classmethod
    def full(cls, width, height, bit=1):
        return cls(np.full((height, width), bit, dtype=np.uint8))

    def __repr__(self):
        return f"Mask({self.width}x{self.height})"


def apply_mask(image, mask):
    """Element-wise product of an image with a binary mask.

    Samples are untouched (bit-exact) where the mask bit is 1 and exactly 0.0
    where it is 0; all channels share the mask bit.
    """
    if (image.height, image.width) != (mask.height, mask.width):
        raise SizeMismatchError(
            f"image {image.width}x{image.height} vs mask {mask.width}x{mask.height}"
        )
    keep = mask.bits[:, :, None] == 1
    return Image(np.where(keep, image.samples, 0.0))


def downsample_mask_min(mask, target_w, target_h):
    """Min-pool a mask down to (target_w, target_h).

    An output cell is 1 only if every covered source bit is 1, so any
    partially occluded cell counts as masked. Source dimensions must be
    divisible by the target dimensions.
    """
    if target_w < 1 or target_h < 1:
        raise SizeMismatchError("target dimensions must be positive")
    if mask.width % target_w != 0 or mask.height % target_h != 0:
        raise SizeMismatchError(
            f"mask {mask.width}x{mask.height} not divisible by target {target_w}x{target_h}"
        )
    fh = mask.height // target_h
    fw = mask.width // target_w
    blocks = mask.bits.reshape(target_h, fh, target_w, fw)
    return Mask(blocks.min(axis=(1, 3)))


# --- NetPBM I/O ----------------------------------------------------------

_MAGICS = (b"P2", b"P3", b"P5", b"P6")


def _parse_header(data):
    """Return (magic, width, height, maxval, payload_offset)."""
    if len(data) < 2:
        raise BadMagicError("file shorter than a magic number")
    magic = bytes(data[:2])
    if magic not in _MAGICS:
        raise BadMagicError(f"unsupported magic {magic!r}")
    # Three whitespace-separated integer tokens follow the magic.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token:
            raise TruncatedError("header ended before width/height/maxval")
        try:
            fields.append(int(token))
        except ValueError:
            raise TruncatedError(f"non-numeric header token {token!r}") from None
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise TruncatedError("missing whitespace after maxval")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise TruncatedError(f"non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise MaxvalError(f"maxval must be 255, got {maxval}")
    return magic, width, height, maxval, pos


def _read_samples(data, magic, width, height):
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    _, _, _, _, pos = _parse_header(data)
    if magic in (b"P5", b"P6"):
        payload = data[pos:]
        if len(payload) < count:
            raise TruncatedError(f"payload holds {len(payload)} bytes, expected {count}")
        if len(payload) > count:
            raise TruncatedError(f"payload holds {len(payload) - count} trailing bytes")
        flat = np.frombuffer(payload, dtype=np.uint8)
    else:
        tokens = data[pos:].split()
        if len(tokens) < count:
            raise TruncatedError(f"payload holds {len(tokens)} samples, expected {count}")
        if len(tokens) > count:
            raise TruncatedError(f"payload holds {len(tokens) - count} trailing samples")
        try:
            flat = np.array([int(t) for t in tokens], dtype=np.int64)
        except ValueError:
            raise TruncatedError("non-numeric sample token") from None
        if flat.min() < 0 or flat.max() > 255:
            raise TruncatedError("ASCII sample outside [0, 255]")
        flat = flat.astype(np.uint8)
    return flat.reshape(height, width, channels)


def read_image(data):
    """Parse NetPBM bytes (P2/P3/P5/P6, maxval 255) into an Image."""
    magic, width, height, _, _ = _parse_header(data)
    raw = _read_samples(data, magic, width, height)
    return Image(raw.astype(np.float64) / 255.0)


def read_mask(data):
    """Parse a grayscale NetPBM file whose samples are all 0 or 255 into a Mask."""
    magic, width, height, _, _ = _parse_header(data)
    if magic in (b"P3", b"P6"):
        raise MaskDomainError("masks must be grayscale (P2/P5), got a color file")
    raw = _read_samples(data, magic, width, height)[:, :, 0]
    bad = ~np.isin(raw, (0, 255))
    if bad.any():
        value = int(raw[bad][0])
        raise MaskDomainError(f"mask sample {value} outside {{0, 255}}")
    return Mask((raw == 255).astype(np.uint8))


def write_image(image):
    """Serialize an Image to canonical binary NetPBM bytes (P5 or P6)."""
    magic = b"P5" if image.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, image.width, image.height)
    payload = np.round(image.samples * 255.0).astype(np.uint8).tobytes()
    return header + payload


def write_mask(mask):
    """Serialize a Mask to canonical P5 bytes with 0 = masked, 255 = keep."""
    header = b"P5\n%d %d\n255\n" % (mask.width, mask.height)
    payload = (mask.bits * np.uint8(255)).tobytes()
    return header + payload


def write_netpbm(obj):
    """Serialize either raster type to NetPBM bytes."""
    if isinstance(obj, Mask):
        return write_mask(obj)
    if isinstance(obj, Image):
        return write_image(obj)
    raise TypeError(f"expected Image or Mask, got {type(obj).__name__}")


def load_image(path):
    with open(path, "rb") as fh:
        return read_image(fh.read())


def load_mask(path):
    with open(path, "rb") as fh:
        return read_mask(fh.read())


def save(obj, path):
    with open(path, "wb") as fh:
        fh.write(write_netpbm(obj))
