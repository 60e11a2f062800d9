"""Circular mask, weighted SUSAN area and fuzzy damping coefficients.

The mask is the classic 37-pixel SUSAN disc (rows of 3, 5, 7, 7, 7, 5, 3 pixels). Each position
is weighted by the inverse of the number of horizontal and vertical moves needed to reach it
from the nucleus, so the four rings around the nucleus weigh 1, 1/2, 1/3 and 1/4 and the whole
mask (nucleus included) weighs 16.

For every pixel we compute:
- the weighted mean of the mask intensities
- the weighted SUSAN area: sum of w(r) * exp(-((I(r) - I(r0)) / t) ** exponent), nucleus included
- the damping coefficient s = 1 - exp(-(D_max - D)^2 / (2 sigma_D^2)), which suppresses the
  nucleus term of the clustering objective inside homogeneous regions

Every field is computed on a replicate-padded copy, so border pixels see a full mask.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from loguru import logger

from ..models.geometry import Point
from ..models.image import GrayImage, pad_replicate
from ..models.params import InvalidParameter, SusanParams, WeightMode

RADIUS = 3
ROW_HALF_WIDTHS = (1, 2, 3, 3, 3, 2, 1)


class InvalidRatio(InvalidParameter):
    """Raised when the minimum response ratio is outside (0, 1)."""


class CircularMask(NamedTuple):
    """Mask offsets in row-major order with one weight per offset."""

    offsets: tuple[Point, ...]
    weights: tuple[float, ...]
    mode: WeightMode = WeightMode.CIRCULAR

    @property
    def total(self) -> float:
        return math.fsum(self.weights)

    def rings(self) -> dict[int, int]:
        """Number of offsets at each Manhattan distance from the nucleus."""
        counts: dict[int, int] = {}
        for offset in self.offsets:
            counts[offset.manhattan] = counts.get(offset.manhattan, 0) + 1
        return dict(sorted(counts.items()))


def _weight(offset: Point, mode: WeightMode) -> float:
    if offset == (0, 0) or mode == WeightMode.UNIFORM:
        return 1.0
    if mode == WeightMode.CARTESIAN:
        return 1.0 / math.hypot(offset.x, offset.y)
    return 1.0 / offset.manhattan


def build_mask(mode: WeightMode = WeightMode.CIRCULAR) -> CircularMask:
    """Build the 37-pixel mask with weights for the given mode."""
    offsets = tuple(
        Point(dx, dy)
        for dy, half in zip(range(-RADIUS, RADIUS + 1), ROW_HALF_WIDTHS)
        for dx in range(-half, half + 1)
    )
    return CircularMask(offsets, tuple(_weight(o, mode) for o in offsets), mode)


def solve_t(min_ratio: float = 1 / 16, max_dev: float = 255.0, exponent: int = 6) -> float:
    """Solve exp(-(max_dev / t) ** exponent) = min_ratio for t."""
    if not 0 < min_ratio < 1:
        raise InvalidRatio(f"Minimum response ratio must lie in (0, 1), got {min_ratio}")
    return max_dev / math.log(1 / min_ratio) ** (1 / exponent)


def resolve_t(params: SusanParams) -> float:
    """The configured t, or the one solved from the response floor."""
    if params.t is not None:
        return params.t
    return solve_t(params.min_ratio, params.max_dev, params.exponent)


def similarity(deviation, t: float, exponent: int):
    """SUSAN response for an intensity deviation: 1 when equal, decaying with |deviation|."""
    return np.exp(-((np.asarray(deviation, dtype=np.float64) / t) ** exponent))


def _mask_values(image: GrayImage, at: Point, mask: CircularMask) -> np.ndarray:
    if not image.size.contains(at):
        raise IndexError(f"Pixel {at} lies outside the {image.size} image")
    padded = pad_replicate(image, RADIUS).pixels.astype(np.float64)
    return np.array([padded[at.y + RADIUS + o.y, at.x + RADIUS + o.x] for o in mask.offsets])


def weighted_mean(image: GrayImage, at: Point, mask: CircularMask) -> float:
    """Weighted mean of the mask intensities around one pixel."""
    values = _mask_values(image, at, mask)
    weights = np.asarray(mask.weights)
    return float(weights @ values / mask.total)


def weighted_susan_area(image: GrayImage, at: Point, mask: CircularMask, params: SusanParams) -> float:
    """Weighted SUSAN area around one pixel, nucleus included."""
    values = _mask_values(image, at, mask)
    nucleus = float(image.at(at))
    response = similarity(values - nucleus, resolve_t(params), params.exponent)
    return float(np.asarray(mask.weights) @ response)


def _shifts(image: GrayImage, mask: CircularMask):
    """Yield (weight, shifted raster) for every mask offset."""
    padded = pad_replicate(image, RADIUS).pixels.astype(np.float64)
    h, w = image.pixels.shape
    for offset, weight in zip(mask.offsets, mask.weights):
        top, left = RADIUS + offset.y, RADIUS + offset.x
        yield weight, padded[top : top + h, left : left + w]


def weighted_mean_field(image: GrayImage, mask: CircularMask) -> np.ndarray:
    """Weighted mean for every pixel."""
    total = np.zeros(image.pixels.shape)
    for weight, shifted in _shifts(image, mask):
        total += weight * shifted
    return total / mask.total


def susan_area_field(image: GrayImage, mask: CircularMask, params: SusanParams) -> np.ndarray:
    """Weighted SUSAN area for every pixel."""
    t = resolve_t(params)
    nucleus = image.as_float()
    area = np.zeros(image.pixels.shape)
    for weight, shifted in _shifts(image, mask):
        area += weight * similarity(shifted - nucleus, t, params.exponent)
    return area


@dataclass(frozen=True, eq=False)
class NeighborhoodField:
    """Per-pixel neighbourhood statistics, fixed for the whole clustering run."""

    weighted_mean: np.ndarray
    area: np.ndarray
    damping: np.ndarray
    sigma: float
    d_max: float
    t: float

    @property
    def membership(self) -> np.ndarray:
        """Gaussian homogeneity membership mu(D) = 1 - s."""
        return 1.0 - self.damping

    def undamped(self) -> NeighborhoodField:
        """Same field with s = 1 everywhere (weighted mean only, no nucleus damping)."""
        return NeighborhoodField(
            self.weighted_mean, self.area, np.ones_like(self.damping), self.sigma, self.d_max, self.t
        )

    def heatmap(self) -> GrayImage:
        """Damping coefficients scaled to [0, 255]."""
        return GrayImage(np.clip(np.rint(self.damping * 255), 0, 255))


def fuzzy_damping(area: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Map SUSAN areas to damping coefficients. Returns (s, sigma, d_max).

    A constant area field has sigma 0; every pixel is then treated as fully homogeneous (s = 0).
    """
    d_max = float(area.max())
    if d_max == float(area.min()):
        return np.zeros_like(area), 0.0, d_max
    sigma = float(np.std(area))
    membership = np.exp(-((d_max - area) ** 2) / (2 * sigma**2))
    return 1.0 - membership, sigma, d_max


def damping_field(
    image: GrayImage, mask: CircularMask | None = None, params: SusanParams | None = None
) -> NeighborhoodField:
    """Compute weighted means, SUSAN areas and damping coefficients for every pixel."""
    params = params or SusanParams()
    mask = mask or build_mask(params.weights)
    if not image.size:
        raise ValueError("Cannot build a neighbourhood field for an empty image")
    area = susan_area_field(image, mask, params)
    damping, sigma, d_max = fuzzy_damping(area)
    field = NeighborhoodField(weighted_mean_field(image, mask), area, damping, sigma, d_max, resolve_t(params))
    logger.debug(
        f"SUSAN field {image.size}: t={field.t:.4f} D_max={d_max:.4f} sigma_D={sigma:.4f} mean s={damping.mean():.4f}"
    )
    return field
