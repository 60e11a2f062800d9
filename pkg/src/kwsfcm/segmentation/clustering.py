"""Alternating fuzzy c-means solvers.

Three objectives share one solver loop:
- kwsfcm: d_ik = s(k) (1 - K(x_k, v_i)) + alpha (1 - K(xw_k, v_i)), with s the SUSAN damping
  coefficients and xw the circular-weighted mask mean
- kfcm_s: d_ik = (1 - K(x_k, v_i)) + alpha (1 - K(xbar_k, v_i)), xbar the plain mean of the 8
  neighbours (the spatially constrained kernel FCM baseline)
- fcm:    d_ik = (x_k - v_i)^2, classical fuzzy c-means

Each objective is a list of terms (per-pixel coefficient, per-pixel feature). Memberships are
u_ik = d_ik^(-1/(m-1)) / sum_j d_jk^(-1/(m-1)); a pixel at zero distance from some clusters
splits its membership equally among them. Centroids take one fixed-point step with kernels
evaluated at the previous centroids. Iteration stops once no centroid moves by epsilon or more.

Pixel-wise work can be split into chunks run on a thread pool; partial centroid sums are always
combined in chunk order, so results do not depend on scheduling.
"""

import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from loguru import logger

from ..models.image import GrayImage, SegmentationMap, pad_replicate
from ..models.params import Algorithm, ClusterParams, InitMode, InvalidParameter, KernelParams, SusanParams
from ..models.reports import SolveTrace, TraceStep
from .kernel import kernel_distance, kernel_eval
from .susan import NeighborhoodField, damping_field

# Partition steps may raise the objective by rounding only.
PARTITION_TOLERANCE = 1e-9

# u: (c, N) memberships, each column summing to 1. v: (c,) prototype intensities.
type PartitionMatrix = np.ndarray
type Centroids = np.ndarray


class DegenerateCluster(ArithmeticError):
    """Raised when a cluster ends up with zero total weight in the centroid update."""


class Term(NamedTuple):
    """One additive part of an objective: coefficient * distance(feature, v)."""

    coefficient: np.ndarray
    feature: np.ndarray


class Segmentation(NamedTuple):
    map: SegmentationMap
    centroids: Centroids
    partition: PartitionMatrix
    trace: SolveTrace


def _chunks(n: int, workers: int) -> list[slice]:
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds, bounds[1:])]


def _map_chunks[T](function: Callable[[slice], T], chunks: list[slice]) -> list[T]:
    if len(chunks) == 1:
        return [function(chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        return list(pool.map(function, chunks))


def memberships(d: np.ndarray, m: float) -> np.ndarray:
    """Optimal memberships for a (c, n) distance matrix."""
    zero = d <= 0
    singular = zero.any(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # (d_min / d_ik) ** (1 / (m - 1)) stays in (0, 1] and cannot overflow.
        ratio = (d.min(axis=0) / d) ** (1.0 / (m - 1.0))
        u = ratio / ratio.sum(axis=0)
    if singular.any():
        hits = zero[:, singular].astype(np.float64)
        u[:, singular] = hits / hits.sum(axis=0)
    return u


@dataclass
class Objective:
    """A fuzzy clustering objective over flattened pixels.

    `kernel` of None selects the squared Euclidean distance.
    """

    terms: tuple[Term, ...]
    m: float
    kernel: KernelParams | None = None
    workers: int = 1

    @property
    def pixels(self) -> int:
        return self.terms[0].feature.size

    def distances(self, v: np.ndarray, chunk: slice = slice(None)) -> np.ndarray:
        """(c, n) distance matrix for the pixels in `chunk`."""
        v = np.asarray(v, dtype=np.float64)[:, None]
        total = np.zeros((v.shape[0], self.terms[0].feature[chunk].size))
        for coefficient, feature in self.terms:
            f = feature[None, chunk]
            if self.kernel is None:
                total += coefficient[None, chunk] * (f - v) ** 2
            else:
                total += coefficient[None, chunk] * kernel_distance(f, v, self.kernel)
        return total

    def partition(self, v: np.ndarray) -> np.ndarray:
        chunks = _chunks(self.pixels, self.workers)
        parts = _map_chunks(lambda chunk: memberships(self.distances(v, chunk), self.m), chunks)
        return np.concatenate(parts, axis=1)

    def centroids(self, u: np.ndarray, v_prev: np.ndarray) -> np.ndarray:
        v_prev = np.asarray(v_prev, dtype=np.float64)

        def partial_sums(chunk: slice) -> tuple[np.ndarray, np.ndarray]:
            weights = u[:, chunk] ** self.m
            numerator = np.zeros(v_prev.size)
            denominator = np.zeros(v_prev.size)
            for coefficient, feature in self.terms:
                f = feature[None, chunk]
                if self.kernel is None:
                    k = np.ones((v_prev.size, f.shape[1]))
                else:
                    k = kernel_eval(f, v_prev[:, None], self.kernel)
                scaled = weights * coefficient[None, chunk] * k
                numerator += (scaled * f).sum(axis=1)
                denominator += scaled.sum(axis=1)
            return numerator, denominator

        sums = _map_chunks(partial_sums, _chunks(self.pixels, self.workers))
        numerator = sum((s[0] for s in sums), np.zeros(v_prev.size))
        denominator = sum((s[1] for s in sums), np.zeros(v_prev.size))
        empty = np.flatnonzero(denominator == 0)
        if empty.size:
            raise DegenerateCluster(f"Cluster(s) {', '.join(map(str, empty))} have zero total weight")
        return numerator / denominator

    def value(self, u: np.ndarray, v: np.ndarray) -> float:
        """J = sum_i sum_k u_ik^m d_ik."""
        return float(np.sum(u**self.m * self.distances(v)))


def _flat(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.float64).ravel()


def kwsfcm_objective(
    image: GrayImage, field: NeighborhoodField, params: ClusterParams, kparams: KernelParams, workers: int = 1
) -> Objective:
    n = image.size.area
    terms = (
        Term(_flat(field.damping), _flat(image.pixels)),
        Term(np.full(n, params.alpha), _flat(field.weighted_mean)),
    )
    return Objective(terms, params.m, kparams, workers)


def neighbor_mean(image: GrayImage) -> np.ndarray:
    """Plain mean of the 8-connected neighbours of every pixel (replicate borders)."""
    padded = pad_replicate(image, 1).pixels.astype(np.float64)
    h, w = image.pixels.shape
    total = np.zeros((h, w))
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx or dy:
                total += padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return total / 8


def kfcm_s_objective(image: GrayImage, params: ClusterParams, kparams: KernelParams, workers: int = 1) -> Objective:
    n = image.size.area
    terms = (
        Term(np.ones(n), _flat(image.pixels)),
        Term(np.full(n, params.alpha), _flat(neighbor_mean(image))),
    )
    return Objective(terms, params.m, kparams, workers)


def fcm_objective(image: GrayImage, params: ClusterParams, workers: int = 1) -> Objective:
    return Objective((Term(np.ones(image.size.area), _flat(image.pixels)),), params.m, None, workers)


def initial_centroids(image: GrayImage, params: ClusterParams) -> Centroids:
    """Equispaced over the intensity range, or seeded uniform draws from it."""
    lo, hi = float(image.pixels.min()), float(image.pixels.max())
    if params.init == InitMode.SEEDED_RANDOM:
        rng = np.random.Generator(np.random.Philox(key=params.seed & ((1 << 64) - 1)))
        return rng.uniform(lo, hi, params.c)
    if params.c > image.distinct():
        logger.warning(f"c={params.c} exceeds the {image.distinct()} distinct intensities; clusters will coincide")
    return lo + (np.arange(params.c) + 0.5) * (hi - lo) / params.c


def _starting_centroids(v0: Sequence[float], params: ClusterParams) -> Centroids:
    v = np.asarray(v0, dtype=np.float64)
    if v.shape != (params.c,) or not np.isfinite(v).all():
        raise InvalidParameter(f"Expected {params.c} finite starting centroids, got {list(v0)}")
    return v

def update_partition(
    image: GrayImage, field: NeighborhoodField, v, params: ClusterParams, kparams: KernelParams
) -> PartitionMatrix:
    """KWSFCM membership update for fixed centroids."""
    return kwsfcm_objective(image, field, params, kparams).partition(np.asarray(v, dtype=np.float64))


def update_centroids(
    image: GrayImage, field: NeighborhoodField, u: PartitionMatrix, v_prev, params: ClusterParams, kparams: KernelParams
) -> Centroids:
    """KWSFCM centroid update, kernels evaluated at `v_prev`."""
    return kwsfcm_objective(image, field, params, kparams).centroids(u, np.asarray(v_prev, dtype=np.float64))


def solve(
    objective: Objective,
    image: GrayImage,
    params: ClusterParams,
    snapshot_at: Iterable[int] = (),
    v0: Sequence[float] | None = None,
) -> Segmentation:
    """Alternate partition and centroid updates until the centroids settle.

    `v0` replaces the configured initialisation with explicit starting centroids.
    """
    snapshot_at = frozenset(snapshot_at)
    v = initial_centroids(image, params) if v0 is None else _starting_centroids(v0, params)
    u = objective.partition(v)
    trace = SolveTrace(params.max_iter)
    best = (math.inf, u, v)
    for iteration in range(1, params.max_iter + 1):
        v_new = objective.centroids(u, v)
        before = objective.value(u, v_new)
        u_new = objective.partition(v_new)
        after = objective.value(u_new, v_new)
        shift = float(np.max(np.abs(v_new - v)))
        step = TraceStep(
            iteration=iteration,
            objective=after,
            centroids=tuple(float(c) for c in v_new),
            centroid_shift=shift,
            membership_change=float(np.max(np.abs(u_new - u))),
            partition_gain=before - after,
            stochastic_error=float(np.max(np.abs(u_new.sum(axis=0) - 1.0))),
        )
        trace.steps.append(step)
        logger.debug(f"iteration {iteration}: J={after:.6g} shift={shift:.3g} v={np.round(v_new, 3).tolist()}")
        if step.partition_gain < -PARTITION_TOLERANCE * max(1.0, abs(before)):
            logger.warning(f"iteration {iteration}: partition step raised J by {-step.partition_gain:.3g}")
        if trace.steps[-2:-1] and after > trace.steps[-2].objective:
            logger.warning(f"iteration {iteration}: J increased from {trace.steps[-2].objective:.6g}")
        if iteration in snapshot_at:
            trace.snapshots[iteration] = u_new.copy()
        u, v = u_new, v_new
        if after < best[0]:
            best = (after, u, v)
        if shift < params.epsilon:
            trace.converged = True
            break
    if not trace.converged:
        logger.warning(f"No convergence within {params.max_iter} iterations; keeping the lowest-objective iterate")
        _, u, v = best
    if snapshot_at:
        trace.snapshots[trace.iterations] = u.copy()
    labels = u.argmax(axis=0).reshape(image.pixels.shape)
    return Segmentation(SegmentationMap(labels, params.c), v, u, trace)


def kwsfcm_segment(
    image: GrayImage,
    params: ClusterParams | None = None,
    kparams: KernelParams | None = None,
    sparams: SusanParams | None = None,
    *,
    damping: bool = True,
    field: NeighborhoodField | None = None,
    workers: int = 1,
    snapshot_at: Sequence[int] = (),
    v0: Sequence[float] | None = None,
) -> Segmentation:
    """Segment with weighted SUSAN kernel FCM. `damping=False` fixes s = 1."""
    params = params or ClusterParams()
    field = field or damping_field(image, params=sparams or SusanParams())
    if not damping:
        field = field.undamped()
    objective = kwsfcm_objective(image, field, params, kparams or KernelParams(), workers)
    return solve(objective, image, params, snapshot_at, v0)


def fcm_segment(
    image: GrayImage, params: ClusterParams | None = None, *, workers: int = 1, snapshot_at: Sequence[int] = ()
) -> Segmentation:
    """Segment with classical fuzzy c-means."""
    params = params or ClusterParams()
    return solve(fcm_objective(image, params, workers), image, params, snapshot_at)


def kfcm_s_segment(
    image: GrayImage,
    params: ClusterParams | None = None,
    kparams: KernelParams | None = None,
    *,
    workers: int = 1,
    snapshot_at: Sequence[int] = (),
) -> Segmentation:
    """Segment with the spatially constrained kernel FCM baseline."""
    params = params or ClusterParams()
    objective = kfcm_s_objective(image, params, kparams or KernelParams(), workers)
    return solve(objective, image, params, snapshot_at)


def segment(
    algorithm: Algorithm,
    image: GrayImage,
    params: ClusterParams,
    kparams: KernelParams,
    sparams: SusanParams,
    *,
    damping: bool = True,
    workers: int = 1,
    snapshot_at: Sequence[int] = (),
) -> Segmentation:
    """Dispatch to the requested algorithm."""
    match Algorithm(algorithm):
        case Algorithm.KWSFCM:
            return kwsfcm_segment(
                image, params, kparams, sparams, damping=damping, workers=workers, snapshot_at=snapshot_at
            )
        case Algorithm.KFCM_S:
            return kfcm_s_segment(image, params, kparams, workers=workers, snapshot_at=snapshot_at)
        case _:
            return fcm_segment(image, params, workers=workers, snapshot_at=snapshot_at)
