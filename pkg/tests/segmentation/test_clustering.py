"""Tests for the alternating fuzzy c-means solvers."""

import itertools
import time

import numpy as np
import pytest
from loguru import logger

from kwsfcm.models.geometry import Size
from kwsfcm.models.image import GrayImage
from kwsfcm.models.params import (
    Algorithm,
    ClusterParams,
    InitMode,
    InvalidParameter,
    KernelParams,
    NoiseKind,
    NoiseSpec,
    SusanParams,
)
from kwsfcm.segmentation.clustering import (
    DegenerateCluster,
    Objective,
    fcm_objective,
    fcm_segment,
    initial_centroids,
    kfcm_s_segment,
    kwsfcm_objective,
    kwsfcm_segment,
    memberships,
    neighbor_mean,
    segment,
    solve,
    update_centroids,
    update_partition,
)
from kwsfcm.segmentation.kernel import kernel_distance
from kwsfcm.segmentation.metrics import segmentation_accuracy
from kwsfcm.segmentation.noise import add_noise
from kwsfcm.segmentation.susan import damping_field


class TestMemberships:
    def test_columns_sum_to_one(self):
        d = np.array([[1.0, 4.0, 9.0], [4.0, 1.0, 9.0]])
        u = memberships(d, 2.0)
        assert np.allclose(u.sum(axis=0), 1.0)
        assert u[:, 0] == pytest.approx([0.8, 0.2])
        assert u[:, 2] == pytest.approx([0.5, 0.5])

    def test_zero_distance_takes_everything(self):
        u = memberships(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]]), 2.0)
        assert u[:, 0].tolist() == [0.5, 0.0, 0.5]
        assert u[:, 1].tolist() == [0.5, 0.5, 0.0]

    def test_tiny_distances_do_not_overflow(self):
        u = memberships(np.array([[1e-300], [1e-290]]), 1.05)
        assert np.isfinite(u).all()
        assert u.sum() == pytest.approx(1.0)


class TestKKT:
    def test_partition_beats_simplex_grid(self):
        """The membership update minimises each pixel's share of the objective."""
        rng = np.random.default_rng(2024)
        params = ClusterParams()
        kparams = KernelParams()
        grid = np.round(np.arange(0, 1.0001, 0.01), 2)
        for _ in range(20):
            h, w = 2, int(rng.integers(1, 5))
            image = GrayImage(rng.integers(0, 256, size=(h, w)))
            field = damping_field(image)
            v = np.sort(rng.uniform(0, 255, 2))
            u = update_partition(image, field, v, params, kparams)
            d = kwsfcm_objective(image, field, params, kparams).distances(v)
            for k in range(image.size.area):
                best = min(g**params.m * d[0, k] + (1 - g) ** params.m * d[1, k] for g in grid)
                assert np.sum(u[:, k] ** params.m * d[:, k]) <= best + 1e-3

    def test_centroid_update_is_weighted_mean(self, region_factory):
        image = region_factory(12, 8)
        field = damping_field(image)
        params = ClusterParams()
        v = np.array([70.0, 170.0])
        u = update_partition(image, field, v, params, KernelParams())
        v_new = update_centroids(image, field, u, v, params, KernelParams())
        assert 60 <= v_new[0] < v_new[1] <= 180

    def test_crisp_undamped_centroids_are_region_values(self, region_factory):
        image = region_factory(12, 8)
        field = damping_field(image).undamped()
        params = ClusterParams(alpha=0.0)
        high = (image.pixels == 180).ravel()
        u = np.vstack([~high, high]).astype(np.float64)
        v_new = update_centroids(image, field, u, np.array([50.0, 200.0]), params, KernelParams())
        assert v_new == pytest.approx([60.0, 180.0], abs=1e-9)


class TestInit:
    def test_equispaced(self, two_region):
        assert initial_centroids(two_region, ClusterParams(c=2)).tolist() == [90.0, 150.0]
        assert initial_centroids(two_region, ClusterParams(c=4)).tolist() == [75.0, 105.0, 135.0, 165.0]

    def test_seeded_random_is_reproducible(self, two_region):
        params = ClusterParams(c=3, init=InitMode.SEEDED_RANDOM, seed=11)
        a = initial_centroids(two_region, params)
        assert np.array_equal(a, initial_centroids(two_region, params))
        assert np.all((a >= 60) & (a <= 180))
        other = initial_centroids(two_region, ClusterParams(c=3, init=InitMode.SEEDED_RANDOM, seed=12))
        assert not np.array_equal(a, other)


class TestNoiseFree:
    def test_fcm_two_values(self, two_region, two_region_truth):
        result = fcm_segment(two_region)
        assert result.trace.converged
        assert result.centroids == pytest.approx([60.0, 180.0], abs=1e-3)
        assert result.map == two_region_truth

    def test_kwsfcm_two_region(self, two_region, two_region_truth):
        result = kwsfcm_segment(two_region)
        assert result.trace.converged
        assert result.centroids == pytest.approx([60.0, 180.0], abs=3.0)
        assert result.map == two_region_truth

    def test_kfcm_s_two_region(self, two_region, two_region_truth):
        result = kfcm_s_segment(two_region)
        assert result.trace.converged
        assert result.map == two_region_truth

    def test_no_damping_still_segments(self, two_region, two_region_truth):
        assert kwsfcm_segment(two_region, damping=False).map == two_region_truth

    def test_no_damping_objective(self, small_two_region):
        field = damping_field(small_two_region).undamped()
        params, kparams = ClusterParams(), KernelParams()
        v = np.array([50.0, 200.0])
        d = kwsfcm_objective(small_two_region, field, params, kparams).distances(v)
        x = small_two_region.as_float().ravel()
        xw = field.weighted_mean.ravel()
        expected = kernel_distance(x[None], v[:, None], kparams) + params.alpha * kernel_distance(
            xw[None], v[:, None], kparams
        )
        assert np.allclose(d, expected)

    def test_dispatch(self, small_two_region):
        params, kparams, sparams = ClusterParams(), KernelParams(), SusanParams()
        for algorithm in Algorithm:
            result = segment(algorithm, small_two_region, params, kparams, sparams)
            assert result.map.size == small_two_region.size

    def test_three_levels(self):
        pixels = np.repeat(np.array([30, 120, 220], dtype=np.uint8), 20)[None, :].repeat(30, axis=0)
        result = fcm_segment(GrayImage(pixels), ClusterParams(c=3))
        assert sorted(result.map.counts().tolist()) == [600, 600, 600]


class TestDegenerate:
    def test_constant_image_single_cluster(self):
        image = GrayImage.constant(Size(64, 64), 100)
        result = kwsfcm_segment(image, ClusterParams(c=1))
        assert result.trace.converged
        assert result.centroids == pytest.approx([100.0])
        assert np.all(result.map.labels == 0)

    def test_constant_image_two_clusters_split_evenly(self):
        image = GrayImage.constant(Size(8, 8), 100)
        result = kwsfcm_segment(image, ClusterParams(c=2))
        assert np.allclose(result.partition, 0.5)
        assert np.all(result.map.labels == 0)

    def test_zero_weight_cluster(self):
        image = GrayImage.constant(Size(8, 8), 100)
        with pytest.raises(DegenerateCluster):
            kwsfcm_segment(image, ClusterParams(c=2, alpha=0.0))

    def test_non_convergence_keeps_best_iterate(self, small_two_region):
        result = kwsfcm_segment(small_two_region, ClusterParams(max_iter=1, epsilon=1e-12))
        assert not result.trace.converged
        assert result.trace.iterations == 1
        assert result.centroids.tolist() == list(result.trace.steps[0].centroids)


class TestTrace:
    def test_snapshots(self, small_two_region):
        result = kwsfcm_segment(small_two_region, snapshot_at=(1, 2))
        last = result.trace.iterations
        assert {1, 2, last} <= set(result.trace.snapshots)
        assert result.trace.snapshots[1].shape == (2, small_two_region.size.area)

    def test_no_snapshots_by_default(self, small_two_region):
        assert kwsfcm_segment(small_two_region).trace.snapshots == {}

    def test_rising_objective_is_flagged(self, small_two_region, monkeypatch):
        values = itertools.count()
        monkeypatch.setattr(Objective, "value", lambda self, u, v: float(next(values)))
        warnings: list[str] = []
        sink = logger.add(lambda m: warnings.append(m.record["message"]), level="WARNING")
        try:
            params = ClusterParams(max_iter=3)
            solve(fcm_objective(small_two_region, params), small_two_region, params)
        finally:
            logger.remove(sink)
        assert any("J increased" in message for message in warnings)

    def test_partition_steps_never_raise_objective(self, two_region):
        noisy = add_noise(two_region, NoiseSpec(NoiseKind.SALT_PEPPER, 0.2, 5))
        trace = kwsfcm_segment(noisy).trace
        for step in trace.steps:
            assert step.partition_gain >= -1e-9 * max(1.0, step.objective)


def test_neighbor_mean_excludes_center():
    image = GrayImage.from_rows([[0, 0, 0], [0, 90, 0], [0, 0, 0]])
    mean = neighbor_mean(image)
    assert mean[1, 1] == 0.0
    assert mean[0, 0] == pytest.approx(90 / 8)


def test_parallel_matches_serial(region_factory):
    noisy = add_noise(region_factory(40, 30), NoiseSpec(NoiseKind.SALT_PEPPER, 0.2, 1))
    serial = kwsfcm_segment(noisy, workers=1)
    parallel = kwsfcm_segment(noisy, workers=4)
    assert np.allclose(serial.partition, parallel.partition, atol=1e-9, rtol=0)
    assert np.allclose(serial.centroids, parallel.centroids, atol=1e-9, rtol=0)
    assert serial.map == parallel.map


class TestSaltAndPepperRuns:
    """25 seeded runs on a 100x100 two-region image with 20% salt & pepper noise."""

    @pytest.fixture(scope="class")
    def runs(self, region_factory):
        clean = region_factory()
        reference = fcm_segment(clean).map
        results = []
        for seed in range(25):
            noisy = add_noise(clean, NoiseSpec(NoiseKind.SALT_PEPPER, 0.2, seed))
            kws = kwsfcm_segment(noisy)
            fcm = fcm_segment(noisy)
            results.append(
                (kws, segmentation_accuracy(kws.map, reference), segmentation_accuracy(fcm.map, reference))
            )
        return results

    def test_mean_accuracy(self, runs):
        assert np.mean([sa for _, sa, _ in runs]) >= 99.0

    def test_beats_fcm(self, runs):
        assert sum(kws >= fcm for _, kws, fcm in runs) >= 23

    def test_every_run_converges(self, runs):
        for result, _, _ in runs:
            assert result.trace.converged
            assert result.trace.iterations <= 100
            assert result.trace.steps[-1].centroid_shift < 0.001

    def test_partition_sanity(self, runs):
        for result, _, _ in runs:
            assert all(step.stochastic_error <= 1e-9 for step in result.trace.steps)
            assert result.partition.min() >= 0.0 and result.partition.max() <= 1.0


@pytest.mark.parametrize("m, alpha", list(itertools.product([1.5, 2.0, 3.0], [0.5, 3.8])))
def test_parameter_grid_stays_stochastic(small_two_region, m, alpha):
    result = kwsfcm_segment(small_two_region, ClusterParams(m=m, alpha=alpha))
    assert np.allclose(result.partition.sum(axis=0), 1.0, atol=1e-9)


class TestStartingCentroids:
    def test_reversed_start_permutes_labels(self, region_factory):
        noisy = add_noise(region_factory(40, 30), NoiseSpec(NoiseKind.SALT_PEPPER, 0.2, 3))
        forward = kwsfcm_segment(noisy, v0=[70.0, 170.0])
        backward = kwsfcm_segment(noisy, v0=[170.0, 70.0])
        assert np.allclose(forward.partition, backward.partition[::-1], atol=1e-9, rtol=0)
        assert forward.centroids == pytest.approx(backward.centroids[::-1], abs=1e-9)
        assert np.array_equal(forward.map.labels, 1 - backward.map.labels)
        assert segmentation_accuracy(forward.map, backward.map) == 100.0

    @pytest.mark.parametrize("v0", [[100.0], [10.0, 20.0, 30.0], [10.0, float("nan")]])
    def test_wrong_start_rejected(self, small_two_region, v0):
        with pytest.raises(InvalidParameter):
            kwsfcm_segment(small_two_region, v0=v0)


def test_run_time_grows_with_pixel_count(region_factory):
    """Nine times the pixels costs between 4 and 20 times the wall time."""

    def best_of_three(image):
        timings = []
        for _ in range(3):
            start = time.perf_counter()
            kwsfcm_segment(image)
            timings.append(time.perf_counter() - start)
        return min(timings)

    small = add_noise(region_factory(100, 100), NoiseSpec(NoiseKind.SALT_PEPPER, 0.2, 0))
    large = add_noise(region_factory(300, 300), NoiseSpec(NoiseKind.SALT_PEPPER, 0.2, 0))
    kwsfcm_segment(small)
    ratio = best_of_three(large) / best_of_three(small)
    assert 4.0 <= ratio <= 20.0
