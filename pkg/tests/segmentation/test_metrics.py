"""Tests for segmentation accuracy, the entropy measure and the edge quality factor."""

import math

import numpy as np
import pytest
from scipy import ndimage

from kwsfcm.models.geometry import Point, Size
from kwsfcm.models.image import DimensionMismatch, GrayImage, SegmentationMap
from kwsfcm.models.params import EqfParams
from kwsfcm.segmentation.metrics import (
    DIRECTIONS,
    EmptyRegion,
    NoEdges,
    contingency,
    edge_candidates,
    entropy_measure,
    eqf,
    final_edges,
    fuzzy_derivatives,
    homogeneity,
    inverse_blurriness,
    segmentation_accuracy,
)

OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E", "NE": "SW", "SW": "NE", "NW": "SE", "SE": "NW"}


def _map(rows, c):
    return SegmentationMap(np.array(rows), c)


class TestSegmentationAccuracy:
    def test_identical(self):
        seg = _map([[0, 1], [1, 0]], 2)
        assert segmentation_accuracy(seg, seg) == 100.0

    def test_label_permutation(self):
        a = _map([[0, 1, 2], [2, 1, 0]], 3)
        b = _map([[2, 0, 1], [1, 0, 2]], 3)
        assert segmentation_accuracy(a, b) == 100.0

    def test_partial_agreement(self):
        candidate = _map([[0, 0, 1, 1]], 2)
        reference = _map([[1, 1, 1, 0]], 2)
        # best matching: 0->1 (2 pixels), 1->0 (1 pixel)
        assert segmentation_accuracy(candidate, reference) == 75.0

    def test_different_cluster_counts(self):
        candidate = _map([[0, 1, 2, 2]], 3)
        reference = _map([[0, 0, 1, 1]], 2)
        assert segmentation_accuracy(candidate, reference) == 75.0

    def test_contingency(self):
        table = contingency(_map([[0, 0, 1]], 2), _map([[1, 0, 1]], 2))
        assert table.tolist() == [[1, 1], [0, 1]]

    def test_size_mismatch(self):
        with pytest.raises(DimensionMismatch):
            segmentation_accuracy(_map([[0, 1]], 2), _map([[0], [1]], 2))


class TestEntropy:
    image = GrayImage.from_rows([[0, 0], [10, 20]])
    seg = _map([[0, 0], [1, 1]], 2)

    def test_closed_form_natural_log(self):
        report = entropy_measure(self.image, self.seg)
        assert report.region == pytest.approx(0.5 * math.log(2))
        assert report.layout == pytest.approx(math.log(2))
        assert report.total == pytest.approx(1.5 * math.log(2))
        assert [r.entropy for r in report.regions] == pytest.approx([0.0, math.log(2)])

    def test_base_two(self):
        report = entropy_measure(self.image, self.seg, 2)
        assert report.total == pytest.approx(1.5)
        assert report.base == 2

    def test_single_region(self):
        report = entropy_measure(self.image, _map([[0, 0], [0, 0]], 1))
        assert report.layout == 0.0
        assert report.region == pytest.approx(-(0.5 * math.log(0.5) + 2 * 0.25 * math.log(0.25)))

    def test_empty_region(self):
        seg = _map([[0, 0], [0, 0]], 2)
        with pytest.raises(EmptyRegion):
            entropy_measure(self.image, seg)
        report = entropy_measure(self.image, seg, allow_empty=True)
        assert len(report.regions) == 1
        assert report.layout == 0.0

    def test_invalid_base(self):
        with pytest.raises(ValueError):
            entropy_measure(self.image, self.seg, 1.0)

    def test_size_mismatch(self):
        with pytest.raises(DimensionMismatch):
            entropy_measure(self.image, _map([[0, 1]], 2))

    @pytest.fixture
    def random_case(self):
        rng = np.random.default_rng(31)
        image = GrayImage(rng.integers(0, 256, size=(20, 20)))
        labels = rng.integers(0, 3, size=(20, 20))
        labels[0, :3] = [0, 1, 2]
        return image, SegmentationMap(labels, 3)

    def test_entropy_bounds(self, random_case):
        image, seg = random_case
        report = entropy_measure(image, seg)
        assert report.layout <= math.log(3) + 1e-12
        for region in report.regions:
            levels = np.unique(image.pixels[seg.labels == region.label]).size
            assert region.entropy <= math.log(levels) + 1e-12

    def test_relabeling_invariance(self, random_case):
        image, seg = random_case
        relabeled = SegmentationMap(np.array([2, 0, 1])[seg.labels], 3)
        a, b = entropy_measure(image, seg), entropy_measure(image, relabeled)
        assert b.total == pytest.approx(a.total)
        assert b.region == pytest.approx(a.region)
        assert b.layout == pytest.approx(a.layout)


class TestDirections:
    def test_eight_unique_directions(self):
        assert sorted(d.name for d in DIRECTIONS) == sorted(OPPOSITE)

    def test_pairs_stay_in_three_by_three(self):
        for d in DIRECTIONS:
            for offset in (d.v, d.p1, d.p2, d.p1 + d.v, d.p2 + d.v):
                assert abs(offset.x) <= 1 and abs(offset.y) <= 1

    def test_opposites_negate(self):
        table = {d.name: d for d in DIRECTIONS}
        for d in DIRECTIONS:
            o = table[OPPOSITE[d.name]]
            assert o.v == Point(-d.v.x, -d.v.y)
            assert o.p1 == Point(-d.p1.x, -d.p1.y)
            assert o.p2 == Point(-d.p2.x, -d.p2.y)

    def test_derivatives_on_vertical_step(self):
        image = GrayImage(np.repeat(np.array([[0, 0, 255, 255]], dtype=np.uint8), 4, axis=0))
        east = next(d for d in DIRECTIONS if d.name == "E")
        north = next(d for d in DIRECTIONS if d.name == "N")
        assert all(np.all(diff[:, 1] == 255) for diff in fuzzy_derivatives(image, east))
        assert all(np.all(diff == 0) for diff in fuzzy_derivatives(image, north))


class TestEdgeStages:
    def test_homogeneity_of_constant_image(self):
        assert homogeneity(GrayImage.constant(Size(12, 12), 40), EqfParams()) == 1.0

    def test_candidates_straddle_step(self):
        image = GrayImage(np.repeat(np.array([[0] * 5 + [255] * 5], dtype=np.uint8), 6, axis=0))
        candidates = edge_candidates(image, 10.0)
        assert candidates[:, 4].all() and candidates[:, 5].all()
        assert not candidates[:, :4].any() and not candidates[:, 6:].any()

    def test_final_edges_keep_brighter_side(self):
        image = GrayImage(np.repeat(np.array([[0] * 5 + [255] * 5], dtype=np.uint8), 6, axis=0))
        edges = final_edges(image, edge_candidates(image, 10.0))
        assert edges[:, 5].all()
        assert not edges[:, 4].any()

    def test_isolated_candidate_kept(self):
        image = GrayImage.constant(Size(3, 3), 10)
        candidates = np.zeros((3, 3), dtype=bool)
        candidates[1, 1] = True
        assert final_edges(image, candidates)[1, 1]

    def test_inverse_blurriness(self):
        assert inverse_blurriness(128, 64) == 3.0
        assert inverse_blurriness(51, 102) == 0.0
        assert math.isinf(inverse_blurriness(10, 0))


def _step(width=64, height=64):
    pixels = np.zeros((height, width), dtype=np.uint8)
    pixels[:, width // 2 :] = 255
    return GrayImage(pixels)


def _box_blur(image, size=5):
    blurred = ndimage.uniform_filter1d(image.as_float(), size=size, axis=1, mode="nearest")
    return GrayImage(np.clip(np.rint(blurred), 0, 255))


class TestEqf:
    @pytest.mark.parametrize("gamma", [20, 40, 80, 160])
    def test_sharp_step_beats_blurred_step(self, gamma):
        params = EqfParams(gamma=gamma)
        sharp = eqf(_step(), params)
        blurred = eqf(_box_blur(_step()), params)
        assert sharp.eqf > blurred.eqf

    def test_step_counts(self):
        report = eqf(_step(), EqfParams(), keep_maps=True)
        assert report.edge_count == 128
        assert report.final_count == 64
        assert report.blur_count == 0
        assert report.eqf == 1.0
        assert report.edges[:, 32].all()

    def test_blurred_step_counts(self):
        report = eqf(_box_blur(_step()), EqfParams())
        assert report.edge_count == 6 * 64
        assert report.final_count == 5 * 64
        assert report.blur_count == 64
        assert report.eqf == pytest.approx(1 - 1 / 6)

    def test_range_on_random_images(self):
        rng = np.random.default_rng(99)
        evaluated = 0
        for _ in range(50):
            image = GrayImage(rng.integers(0, 256, size=(16, 16)))
            try:
                report = eqf(image, EqfParams(gamma=float(rng.choice([20, 40, 80, 160]))))
            except NoEdges:
                continue
            evaluated += 1
            assert 0.0 <= report.eqf <= 1.0
            assert report.blur_count <= report.final_count <= report.edge_count
        assert evaluated >= 40

    def test_maps_only_on_request(self):
        report = eqf(_step())
        assert report.edges is None and report.blurred is None

    def test_no_edges(self):
        with pytest.raises(NoEdges):
            eqf(GrayImage.constant(Size(16, 16), 77))

    def test_too_small(self):
        with pytest.raises(DimensionMismatch):
            eqf(GrayImage.constant(Size(5, 5), 0))
