"""Raster data model, Netpbm file I/O, and border padding.

GrayImage, ColorImage and SegmentationMap are immutable wrappers around read-only numpy arrays
(row-major, indexed [y, x]). Storage is 8-bit; computations lift to float64 working copies.

Files are PGM (P2/P5, gray) or PPM (P3/P6, color) with maxval 255. Pillow does the decoding and
encoding; the header is checked here first so that broken files raise a precise ImageFormatError
instead of a generic decoder failure. Saving always writes the binary variants (P5/P6).
"""

import re
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path
from typing import NamedTuple

import numpy as np
from loguru import logger
from PIL import Image

from .geometry import Point, Size

# Largest accepted raster, in pixels.
Image.MAX_IMAGE_PIXELS = 16_000_000

MAXVAL = 255

# magic -> (Pillow mode, channels, binary)
_MAGICS = {
    b"P2": ("L", 1, False),
    b"P5": ("L", 1, True),
    b"P3": ("RGB", 3, False),
    b"P6": ("RGB", 3, True),
}
_TOKEN_RE = re.compile(rb"(?:\s|#[^\r\n]*)*([^\s#]+)")


class ImageFormatError(ValueError):
    """Raised when a file is not a readable 8-bit Netpbm image."""


class MalformedHeader(ImageFormatError):
    """The magic number, dimensions or maxval could not be parsed."""


class UnsupportedMaxVal(ImageFormatError):
    """The maxval is anything other than 255."""

    def __init__(self, maxval: int) -> None:
        super().__init__(f"Unsupported maxval {maxval} (only {MAXVAL} is supported)")
        self.maxval = maxval


class TruncatedData(ImageFormatError):
    """The file ends before all pixels were read."""


class DimensionMismatch(ValueError):
    """Raised when rasters that must share dimensions do not."""


def _as_pixels(values) -> np.ndarray:
    """Validate `values` as 8-bit intensities and return a read-only uint8 array."""
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > MAXVAL):
            raise ValueError(f"Intensities must lie in [0, {MAXVAL}]")
        arr = arr.astype(np.uint8)
    elif arr.flags.writeable:
        arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Width x height grid of 8-bit intensities."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        pixels = _as_pixels(self.pixels)
        if pixels.ndim != 2:
            raise DimensionMismatch(f"Gray image must be 2-dimensional, got shape {pixels.shape}")
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_rows(cls, rows: list[list[int]]) -> GrayImage:
        return cls(np.array(rows))

    @classmethod
    def constant(cls, size: Size, value: int) -> GrayImage:
        return cls(np.full(size.shape, value, dtype=np.uint8))

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def __hash__(self) -> int:
        return hash((self.pixels.shape, self.pixels.tobytes()))

    @property
    def size(self) -> Size:
        return Size.from_shape(self.pixels.shape)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def at(self, point: Point) -> int:
        return int(self.pixels[point.y, point.x])

    def as_float(self) -> np.ndarray:
        """Real-valued working copy."""
        return self.pixels.astype(np.float64)

    def distinct(self) -> int:
        """Number of distinct intensities."""
        return int(np.unique(self.pixels).size)


CHANNELS = ("red", "green", "blue")


@dataclass(frozen=True, eq=False)
class ColorImage:
    """Three gray channels of identical size."""

    red: GrayImage
    green: GrayImage
    blue: GrayImage

    def __post_init__(self) -> None:
        sizes = {channel.size for channel in self.channels}
        if len(sizes) != 1:
            raise DimensionMismatch(f"Channel sizes differ: {', '.join(map(str, sizes))}")

    @classmethod
    def from_array(cls, values) -> ColorImage:
        """Split a (rows, cols, 3) array into channels."""
        arr = np.asarray(values)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionMismatch(f"Color image must have shape (h, w, 3), got {arr.shape}")
        return cls(*(GrayImage(arr[:, :, i]) for i in range(3)))

    @classmethod
    def from_channels(cls, channels: tuple[GrayImage, ...] | list[GrayImage]) -> ColorImage:
        return cls(*channels)

    def __eq__(self, other) -> bool:
        return isinstance(other, ColorImage) and self.channels == other.channels

    def __hash__(self) -> int:
        return hash(self.channels)

    @property
    def channels(self) -> tuple[GrayImage, GrayImage, GrayImage]:
        return self.red, self.green, self.blue

    @property
    def size(self) -> Size:
        return self.red.size

    def to_array(self) -> np.ndarray:
        return np.stack([channel.pixels for channel in self.channels], axis=2)


@dataclass(frozen=True, eq=False)
class SegmentationMap:
    """Per-pixel cluster indices in [0, c)."""

    labels: np.ndarray
    c: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise DimensionMismatch(f"Label map must be 2-dimensional, got shape {labels.shape}")
        if self.c < 1:
            raise ValueError(f"Cluster count must be at least 1, got {self.c}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.c):
            raise ValueError(f"Labels must lie in [0, {self.c})")
        labels = labels.astype(np.intp)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_indexed(cls, image: GrayImage) -> SegmentationMap:
        """Recover labels from an indexed gray image: each distinct gray level is one cluster, darkest first."""
        levels, labels = np.unique(image.pixels, return_inverse=True)
        return cls(labels.reshape(image.pixels.shape), int(levels.size))

    def __eq__(self, other) -> bool:
        return isinstance(other, SegmentationMap) and self.c == other.c and np.array_equal(self.labels, other.labels)

    def __hash__(self) -> int:
        return hash((self.c, self.labels.shape, self.labels.tobytes()))

    @property
    def size(self) -> Size:
        return Size.from_shape(self.labels.shape)

    def counts(self) -> np.ndarray:
        """Pixel count per cluster."""
        return np.bincount(self.labels.ravel(), minlength=self.c)

    def to_indexed(self) -> GrayImage:
        """Render labels as distinct, evenly spaced gray levels."""
        if self.c == 1:
            return GrayImage(np.zeros(self.labels.shape, dtype=np.uint8))
        levels = np.rint(np.arange(self.c) * MAXVAL / (self.c - 1))
        return GrayImage(levels[self.labels])

    def render(self, centroids) -> GrayImage:
        """Replace each pixel by the intensity of its cluster centroid."""
        values = np.clip(np.rint(np.asarray(centroids, dtype=np.float64)), 0, MAXVAL)
        if values.size != self.c:
            raise DimensionMismatch(f"Expected {self.c} centroids, got {values.size}")
        return GrayImage(values[self.labels])


class NetpbmHeader(NamedTuple):
    magic: bytes
    size: Size
    maxval: int
    offset: int

    @property
    def channels(self) -> int:
        return _MAGICS[self.magic][1]

    @property
    def binary(self) -> bool:
        return _MAGICS[self.magic][2]


def read_header(data: bytes) -> NetpbmHeader:
    """Parse magic, width, height and maxval. `offset` points at the first raster byte."""
    tokens: list[bytes] = []
    pos = 0
    for _ in range(4):
        match = _TOKEN_RE.match(data, pos)
        if not match:
            raise MalformedHeader(f"Header ends after {len(tokens)} fields")
        tokens.append(match[1])
        pos = match.end()
    magic, *numbers = tokens
    if magic not in _MAGICS:
        raise MalformedHeader(f"Unknown magic number {magic[:8]!r}")
    if not all(n.isdigit() for n in numbers):
        raise MalformedHeader(f"Non-numeric header fields: {b' '.join(numbers)[:40]!r}")
    width, height, maxval = map(int, numbers)
    if width < 1 or height < 1:
        raise MalformedHeader(f"Invalid dimensions {width}x{height}")
    if maxval != MAXVAL:
        raise UnsupportedMaxVal(maxval)
    # A single whitespace byte separates the header from the raster.
    return NetpbmHeader(magic, Size(width, height), maxval, pos + 1)


def decode_image(data: bytes) -> GrayImage | ColorImage:
    """Decode PGM/PPM bytes. PGM yields a GrayImage, PPM a ColorImage."""
    header = read_header(data)
    if header.binary:
        expected = header.size.area * header.channels
        available = len(data) - header.offset
        if available < expected:
            raise TruncatedData(f"Expected {expected} raster bytes, found {max(available, 0)}")
    try:
        with Image.open(BytesIO(data), formats=["PPM"]) as image:
            image.load()
            arr = np.asarray(image, dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise TruncatedData(f"Raster could not be decoded: {e}") from e
    if header.channels == 1:
        return GrayImage(arr)
    return ColorImage.from_array(arr)


def encode_image(image: GrayImage | ColorImage) -> bytes:
    """Encode as binary PGM (P5) or PPM (P6)."""
    arr = image.pixels if isinstance(image, GrayImage) else image.to_array()
    buffer = BytesIO()
    Image.fromarray(np.ascontiguousarray(arr)).save(buffer, format="PPM")
    return buffer.getvalue()


def load_image(path: str | Path) -> GrayImage | ColorImage:
    """Load a PGM or PPM file."""
    image = decode_image(Path(path).read_bytes())
    kind = "gray" if isinstance(image, GrayImage) else "color"
    logger.debug(f"{Path(path).name}: Loaded {image.size} {kind} image")
    return image


def load_gray(path: str | Path) -> GrayImage:
    """Load a PGM file, refusing color input."""
    image = load_image(path)
    if not isinstance(image, GrayImage):
        raise ImageFormatError(f"{Path(path).name}: Expected a gray (PGM) image, got color")
    return image


def load_color(path: str | Path) -> ColorImage:
    """Load a PPM file, refusing gray input."""
    image = load_image(path)
    if not isinstance(image, ColorImage):
        raise ImageFormatError(f"{Path(path).name}: Expected a color (PPM) image, got gray")
    return image


def save_image(path: str | Path, image: GrayImage | ColorImage) -> None:
    """Write `image` as binary PGM/PPM, creating parent directories as needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_image(image))


def pad_replicate(image: GrayImage, radius: int) -> GrayImage:
    """Grow `image` by `radius` pixels on every side, replicating the nearest edge pixel."""
    if radius < 0:
        raise ValueError(f"Padding radius must be non-negative, got {radius}")
    if radius == 0:
        return image
    return GrayImage(np.pad(image.pixels, radius, mode="edge"))
