import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctseg.errors import DegenerateContour
from ctseg.geometry import (Contour, hausdorff, polygon_iou, rasterize,
                            resample_uniform, signed_area)
from conftest import random_blob


class TestContour:
    def test_rejects_fewer_than_three(self):
        with pytest.raises(DegenerateContour):
            Contour(np.array([[0.0, 0.0], [1.0, 1.0]]))

    def test_rejects_coincident_vertices(self):
        with pytest.raises(DegenerateContour):
            Contour(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]))

    def test_normalizes_cw_to_ccw_keeping_first_vertex(self, unit_square):
        cw = unit_square[::-1]
        c = Contour(cw)
        assert signed_area(c.vertices) > 0
        assert np.allclose(c.vertices[0], cw[0])


class TestResampleUniform:
    def test_square_n4_unchanged(self, unit_square):
        c = resample_uniform(unit_square, 4)
        assert np.allclose(c.vertices, unit_square)

    def test_square_n8_adds_midpoints(self, unit_square):
        # arc-length parameterization by hand: corners plus edge midpoints
        expected = np.array([[0, 0], [0.5, 0], [1, 0], [1, 0.5],
                             [1, 1], [0.5, 1], [0, 1], [0, 0.5]], dtype=float)
        c = resample_uniform(unit_square, 8)
        assert np.allclose(c.vertices, expected)

    def test_degenerate_input(self):
        with pytest.raises(DegenerateContour):
            resample_uniform(np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]), 5)

    def test_uniform_spacing(self):
        rng = np.random.default_rng(3)
        c = random_blob(rng, n=64)
        seg = np.linalg.norm(c.vertices - np.roll(c.vertices, -1, axis=0), axis=1)
        assert np.ptp(seg) / seg.mean() < 1e-5

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        c = random_blob(rng, n=40)
        again = resample_uniform(c.vertices, 40)
        assert np.allclose(again.vertices, c.vertices, atol=1e-6)


class TestRasterize:
    def test_reversed_contour_same_mask(self):
        rng = np.random.default_rng(5)
        c = random_blob(rng, n=30)
        rev = Contour(c.vertices[::-1])
        assert np.array_equal(rasterize(c, 100, 100), rasterize(rev, 100, 100))

    def test_boundary_pixel_center_inside(self):
        c = Contour(np.array([[2.0, 2.0], [6.0, 2.0], [6.0, 6.0], [2.0, 6.0]]))
        mask = rasterize(c, 10, 10)
        assert mask[2, 2] and mask[6, 6] and mask[2, 4]
        assert not mask[1, 2] and not mask[7, 7]


class TestPolygonIoU:
    def test_identical_is_one(self):
        c = Contour(np.array([[5.0, 5.0], [20.0, 5.0], [20.0, 20.0], [5.0, 20.0]]))
        assert polygon_iou(c, c, (32, 32)) == 1.0

    def test_half_shifted_square(self):
        # analytic overlap 0.5 / 1.5 for a unit-ish square shifted by half
        a = resample_uniform([[10, 10], [40, 10], [40, 40], [10, 40]], 100)
        b = resample_uniform([[25, 10], [55, 10], [55, 40], [25, 40]], 100)
        assert polygon_iou(a, b, (64, 64)) == pytest.approx(1 / 3, abs=0.02)

    def test_disjoint_is_zero(self):
        a = Contour(np.array([[2.0, 2.0], [8.0, 2.0], [8.0, 8.0], [2.0, 8.0]]))
        b = a.translated([20.0, 0.0])
        assert polygon_iou(a, b, (32, 32)) == 0.0

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            a = random_blob(rng, n=25, center=(40, 40))
            b = random_blob(rng, n=25, center=(45, 42))
            ab = polygon_iou(a, b, (90, 90))
            assert ab == polygon_iou(b, a, (90, 90))
            assert 0.0 <= ab <= 1.0


class TestHausdorff:
    def test_identical_zero(self):
        rng = np.random.default_rng(7)
        c = random_blob(rng)
        assert hausdorff(c, c) == 0.0

    def test_translated_square(self, unit_square):
        a = Contour(unit_square)
        b = a.translated([3.0, 0.0])
        # brute force over vertex pairs gives exactly the shift
        assert hausdorff(a, b) == pytest.approx(3.0)

    @given(st.integers(0, 2 ** 31))
    @settings(max_examples=25, deadline=None)
    def test_metric_properties(self, seed):
        rng = np.random.default_rng(seed)
        a = random_blob(rng, n=12, center=(30, 30))
        b = random_blob(rng, n=12, center=(35, 28))
        c = random_blob(rng, n=12, center=(28, 36))
        assert hausdorff(a, b) == hausdorff(b, a)
        assert hausdorff(a, a) == 0.0
        assert hausdorff(a, c) <= hausdorff(a, b) + hausdorff(b, c) + 1e-9


def test_contour_json_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    c = random_blob(rng, n=17)
    path = tmp_path / "c.json"
    c.save(path)
    again = Contour.load(path)
    assert np.allclose(again.vertices, c.vertices, atol=1e-6)
    assert again.closed
