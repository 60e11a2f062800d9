"""Evaluation measures: segmentation accuracy, entropy measure E, and edge quality factor.

Segmentation accuracy matches clusters of the candidate map to clusters of the reference map by
maximum overlap (optimal assignment on the contingency table), then counts agreeing pixels.

The entropy measure adds the size-weighted gray-level entropy inside each region (H_r) to the
entropy of the region sizes (H_l). Gray levels are counted in the image that was segmented, not in
the label map.

The edge quality factor runs a fuzzy-rule edge detector and then judges every detected edge pixel
for blur:
1. homogeneity mu: mean over NxN windows of 1 - (W_max - W_min) / L
2. threshold K = alpha_k * (1 - mu) * gamma
3. candidates: in some direction at least 2 of the 3 parallel differences exceed K
4. final edges: candidates brighter than their darkest candidate neighbour
5. blur: the largest inverse blurriness |f - g/2| / (g/2) over the h, v, d1, d2 gradients g is
   below Th
EQF = 1 - blurred / candidates.
"""

import math
from typing import NamedTuple

import numpy as np
from loguru import logger
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from ..models.geometry import Point
from ..models.image import MAXVAL, DimensionMismatch, GrayImage, SegmentationMap, pad_replicate
from ..models.params import EqfParams
from ..models.reports import EntropyReport, EqfReport, RegionEntropy


class EmptyRegion(ValueError):
    """Raised when a cluster of the map has no pixels."""


class NoEdges(ArithmeticError):
    """Raised when no edge candidates exist, leaving the edge quality factor undefined."""


def contingency(candidate: SegmentationMap, reference: SegmentationMap) -> np.ndarray:
    """(candidate.c, reference.c) table of overlapping pixel counts."""
    if candidate.size != reference.size:
        raise DimensionMismatch(f"Map sizes differ: {candidate.size} vs {reference.size}")
    pairs = candidate.labels.ravel() * reference.c + reference.labels.ravel()
    return np.bincount(pairs, minlength=candidate.c * reference.c).reshape(candidate.c, reference.c)


def segmentation_accuracy(candidate: SegmentationMap, reference: SegmentationMap) -> float:
    """Percentage of pixels whose matched cluster agrees with the reference."""
    table = contingency(candidate, reference)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return 100.0 * float(table[rows, cols].sum()) / reference.labels.size


def _entropy(probabilities: np.ndarray) -> float:
    p = probabilities[probabilities > 0]
    return float(-np.sum(p * np.log(p)))


def entropy_measure(
    image: GrayImage, seg: SegmentationMap, log_base: float = math.e, *, allow_empty: bool = False
) -> EntropyReport:
    """Region entropy, layout entropy and their sum for `seg` over the gray levels of `image`."""
    if image.size != seg.size:
        raise DimensionMismatch(f"Image {image.size} and map {seg.size} differ in size")
    if log_base <= 0 or log_base == 1:
        raise ValueError(f"Logarithm base must be positive and not 1, got {log_base}")
    joint = np.bincount(
        seg.labels.ravel() * (MAXVAL + 1) + image.pixels.ravel(), minlength=seg.c * (MAXVAL + 1)
    ).reshape(seg.c, MAXVAL + 1)
    sizes = joint.sum(axis=1)
    empty = np.flatnonzero(sizes == 0)
    if empty.size:
        if not allow_empty:
            raise EmptyRegion(f"Region(s) {', '.join(map(str, empty))} contain no pixels")
        logger.warning(f"Ignoring {empty.size} empty region(s) in the entropy measure")
    scale = math.log(log_base)
    total = sizes.sum()
    regions = tuple(
        RegionEntropy(int(j), int(sizes[j]), _entropy(joint[j] / sizes[j]) / scale) for j in np.flatnonzero(sizes)
    )
    region = math.fsum(r.pixels / total * r.entropy for r in regions)
    layout = _entropy(sizes / total) / scale
    return EntropyReport(region, layout, regions, log_base)


class Direction(NamedTuple):
    """Unit step `v` of a fuzzy derivative and the two side offsets of its parallel differences."""

    name: str
    v: Point
    p1: Point
    p2: Point


# Each direction's pixel pairs stay inside the 3x3 mask; the opposite direction negates all offsets.
DIRECTIONS = (
    Direction("NW", Point(-1, -1), Point(1, 0), Point(0, 1)),
    Direction("W", Point(-1, 0), Point(0, 1), Point(0, -1)),
    Direction("SW", Point(-1, 1), Point(1, 0), Point(0, -1)),
    Direction("S", Point(0, 1), Point(-1, 0), Point(1, 0)),
    Direction("SE", Point(1, 1), Point(-1, 0), Point(0, -1)),
    Direction("E", Point(1, 0), Point(0, -1), Point(0, 1)),
    Direction("NE", Point(1, -1), Point(-1, 0), Point(0, 1)),
    Direction("N", Point(0, -1), Point(1, 0), Point(-1, 0)),
)

# Gradient pairs of the blur stage: (name, first offset, second offset).
BLUR_AXES = (
    ("h", Point(1, 0), Point(-1, 0)),
    ("v", Point(0, 1), Point(0, -1)),
    ("d1", Point(-1, 1), Point(1, -1)),
    ("d2", Point(1, 1), Point(-1, -1)),
)

NEIGHBOURS = tuple(Point(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dx or dy)


class _Shifter:
    """Shifted views of a 1-pixel padded raster."""

    def __init__(self, padded: np.ndarray, shape: tuple[int, int]) -> None:
        self.padded = padded
        self.h, self.w = shape

    def __call__(self, offset: Point) -> np.ndarray:
        return self.padded[1 + offset.y : 1 + offset.y + self.h, 1 + offset.x : 1 + offset.x + self.w]


def homogeneity(image: GrayImage, params: EqfParams) -> float:
    """Mean of 1 - (W_max - W_min) / L over the NxN window around every pixel (replicated borders)."""
    values = image.pixels.astype(np.float64)
    spread = ndimage.maximum_filter(values, size=params.n, mode="nearest") - ndimage.minimum_filter(
        values, size=params.n, mode="nearest"
    )
    return float(np.mean(1.0 - spread / params.levels))


def fuzzy_derivatives(image: GrayImage, direction: Direction) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three parallel absolute differences of `direction` at every pixel."""
    at = _Shifter(pad_replicate(image, 1).pixels.astype(np.float64), image.pixels.shape)
    v, p1, p2 = direction.v, direction.p1, direction.p2
    origin = Point(0, 0)
    return (
        np.abs(at(v) - at(origin)),
        np.abs(at(p1 + v) - at(p1)),
        np.abs(at(p2 + v) - at(p2)),
    )


def edge_candidates(image: GrayImage, k: float) -> np.ndarray:
    """Pixels where, in some direction, at least 2 of the 3 derivatives exceed `k`."""
    candidates = np.zeros(image.pixels.shape, dtype=bool)
    for direction in DIRECTIONS:
        large = sum((d > k).astype(np.int8) for d in fuzzy_derivatives(image, direction))
        candidates |= large >= 2
    return candidates


def final_edges(image: GrayImage, candidates: np.ndarray) -> np.ndarray:
    """Candidates brighter than the darkest candidate among their 8 neighbours.

    A candidate without candidate neighbours is kept.
    """
    shape = image.pixels.shape
    values = _Shifter(pad_replicate(image, 1).pixels.astype(np.float64), shape)
    flags = _Shifter(np.pad(candidates, 1, constant_values=False), shape)
    darkest = np.full(shape, np.inf)
    for offset in NEIGHBOURS:
        darkest = np.minimum(darkest, np.where(flags(offset), values(offset), np.inf))
    own = image.pixels.astype(np.float64)
    return candidates & ((own > darkest) | np.isinf(darkest))


def inverse_blurriness(f, gradient):
    """|f - g/2| / (g/2); +inf where the gradient is zero."""
    f = np.asarray(f, dtype=np.float64)
    half = np.asarray(gradient, dtype=np.float64) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(half > 0, np.abs(f - half) / half, np.inf)
    return float(ratio) if ratio.ndim == 0 else ratio


def blurred_edges(image: GrayImage, edges: np.ndarray, th: float) -> np.ndarray:
    """Edges whose largest finite inverse blurriness is below `th`.

    Zero-gradient directions (infinite ratio) take no part; an edge with no gradient at all is not blurred.
    """
    f = image.pixels.astype(np.float64)
    at = _Shifter(pad_replicate(image, 1).pixels.astype(np.float64), f.shape)
    ratios = np.stack([inverse_blurriness(f, np.abs(at(a) - at(b))) for _, a, b in BLUR_AXES])
    finite = np.isfinite(ratios)
    largest = np.where(finite, ratios, -np.inf).max(axis=0)
    return edges & finite.any(axis=0) & (largest < th)


def eqf(image: GrayImage, params: EqfParams | None = None, *, keep_maps: bool = False) -> EqfReport:
    """Edge quality factor of `image`. Raises NoEdges when nothing qualifies as an edge candidate."""
    params = params or EqfParams()
    if image.width < params.n or image.height < params.n:
        raise DimensionMismatch(f"Image {image.size} is smaller than the {params.n}x{params.n} window")
    mu = homogeneity(image, params)
    k = params.alpha_k * (1.0 - mu) * params.gamma
    candidates = edge_candidates(image, k)
    edge_count = int(candidates.sum())
    if edge_count == 0:
        raise NoEdges(f"No edge candidates above K={k:.4f}")
    edges = final_edges(image, candidates)
    blurred = blurred_edges(image, edges, params.th)
    report = EqfReport(
        mu=mu,
        k=k,
        edge_count=edge_count,
        final_count=int(edges.sum()),
        blur_count=int(blurred.sum()),
        edges=edges if keep_maps else None,
        blurred=blurred if keep_maps else None,
    )
    logger.debug(
        f"EQF: mu={mu:.4f} K={k:.3f} candidates={edge_count} final={report.final_count} blurred={report.blur_count}"
    )
    return report
