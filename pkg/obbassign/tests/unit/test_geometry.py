"""
Unit tests for oriented box geometry.
"""
import math
import unittest

import numpy as np
import shapely

from obbassign.geometry import (
    HALF_PI,
    INSCRIBED_KERNEL_VALUE,
    OBB,
    DegenerateGeometryError,
    Gaussian2D,
    Polygon,
    convex_hull,
    covariance_components,
    gaussian_density,
    gaussian_kernel,
    min_area_obb,
    obb_corners,
    obb_iou,
    obb_to_gaussian,
    point_in_obb,
    points_in_obb,
    polygon_iou,
    rotation_matrix,
    signed_area,
)
from obbassign.tests.fixtures.test_data import random_obb


def _edge_midpoints(obb: OBB) -> np.ndarray:
    corners = obb_corners(obb).vertices
    return (corners + np.roll(corners, -1, axis=0)) / 2.0


class TestOBB(unittest.TestCase):
    """Construction and canonical form."""

    def test_angle_in_range_is_kept(self):
        obb = OBB(1.0, 2.0, 30.0, 10.0, 0.4)
        self.assertEqual(obb.theta, 0.4)
        self.assertEqual((obb.w, obb.h), (30.0, 10.0))

    def test_quarter_turn_swaps_sides(self):
        obb = OBB(0.0, 0.0, 30.0, 10.0, HALF_PI + 0.2)
        self.assertAlmostEqual(obb.theta, 0.2, places=12)
        self.assertEqual((obb.w, obb.h), (10.0, 30.0))

    def test_half_turn_keeps_sides(self):
        obb = OBB(0.0, 0.0, 30.0, 10.0, math.pi + 0.2)
        self.assertAlmostEqual(obb.theta, 0.2, places=12)
        self.assertEqual((obb.w, obb.h), (30.0, 10.0))

    def test_negative_angle_is_wrapped(self):
        obb = OBB(0.0, 0.0, 30.0, 10.0, -0.3)
        self.assertAlmostEqual(obb.theta, HALF_PI - 0.3, places=12)
        self.assertEqual((obb.w, obb.h), (10.0, 30.0))

    def test_canonical_form_is_same_rectangle(self):
        raw = OBB(5.0, 7.0, 40.0, 12.0, 0.0)
        turned = OBB(5.0, 7.0, 12.0, 40.0, HALF_PI)
        self.assertAlmostEqual(obb_iou(raw, turned), 1.0, places=9)

    def test_nonpositive_side_rejected(self):
        with self.assertRaises(ValueError):
            OBB(0.0, 0.0, 0.0, 10.0, 0.0)
        with self.assertRaises(ValueError):
            OBB(0.0, 0.0, 5.0, -1.0, 0.0)

    def test_non_finite_rejected(self):
        with self.assertRaises(ValueError):
            OBB(float('nan'), 0.0, 5.0, 5.0, 0.0)
        with self.assertRaises(ValueError):
            OBB(0.0, 0.0, 5.0, 5.0, float('inf'))

    def test_edges_and_area(self):
        obb = OBB(0.0, 0.0, 8.0, 3.0, 0.1)
        self.assertEqual(obb.area, 24.0)
        self.assertEqual(obb.long_edge, 8.0)
        self.assertEqual(obb.short_edge, 3.0)

    def test_array_round_trip(self):
        obb = OBB(1.5, 2.5, 8.0, 3.0, 0.7)
        self.assertEqual(OBB.from_array(obb.as_array()), obb)


class TestGaussian(unittest.TestCase):
    """OBB to Gaussian conversion and kernel evaluation."""

    def test_axis_aligned_covariance(self):
        g = obb_to_gaussian(OBB(3.0, 4.0, 12.0, 6.0, 0.0))
        np.testing.assert_allclose(g.mu, [3.0, 4.0])
        np.testing.assert_allclose(g.sigma, [[12.0, 0.0], [0.0, 3.0]])

    def test_shrunk_covariance_axis_aligned(self):
        s00, s01, s11 = covariance_components(12.0, 6.0, 0.0, shrink=True)
        self.assertAlmostEqual(s00, 6.0 * 12.0 / 12.0)
        self.assertAlmostEqual(s01, 0.0)
        self.assertAlmostEqual(s11, 6.0 * 6.0 / 12.0)

    def test_square_box_is_isotropic(self):
        g = obb_to_gaussian(OBB(0.0, 0.0, 10.0, 10.0, 0.6))
        np.testing.assert_allclose(g.sigma, np.eye(2) * 100.0 / 12.0, atol=1e-12)

    def test_kernel_is_one_at_center(self):
        obb = OBB(10.0, 20.0, 30.0, 8.0, 0.3)
        for shrink in (False, True):
            self.assertEqual(gaussian_kernel(obb_to_gaussian(obb, shrink), [10.0, 20.0]), 1.0)

    def test_inscribed_contour_touches_edge_midpoints(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            obb = random_obb(rng)
            g = obb_to_gaussian(obb)
            for point in _edge_midpoints(obb):
                self.assertAlmostEqual(gaussian_kernel(g, point), INSCRIBED_KERNEL_VALUE, delta=1e-9)

    def test_shrunk_level_set_axes(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            obb = random_obb(rng)
            if abs(obb.w - obb.h) < 1e-3:
                continue
            g = obb_to_gaussian(obb, shrink=True)
            eigenvalues = np.linalg.eigvalsh(g.sigma)
            # Full axis length where the kernel equals exp(-1.5): 2 sqrt(3 lambda)
            minor, major = sorted(2.0 * np.sqrt(3.0 * eigenvalues))
            self.assertAlmostEqual(major / math.sqrt(obb.w * obb.h), 1.0, delta=1e-6)
            self.assertAlmostEqual(minor / obb.short_edge, 1.0, delta=1e-6)

    def test_density_at_center(self):
        obb = OBB(0.0, 0.0, 12.0, 6.0, 0.0)
        g = obb_to_gaussian(obb)
        expected = 1.0 / (2.0 * math.pi * math.sqrt(12.0 * 3.0))
        self.assertAlmostEqual(gaussian_density(g, [0.0, 0.0]), expected, places=15)

    def test_non_symmetric_covariance_rejected(self):
        with self.assertRaises(ValueError):
            Gaussian2D(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_indefinite_covariance_rejected(self):
        with self.assertRaises(ValueError):
            Gaussian2D(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_kernel_survives_rigid_motion(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            obb = random_obb(rng, 200.0, 200.0)
            point = obb.center + rng.uniform(-80.0, 80.0, 2)
            angle = float(rng.uniform(-math.pi, math.pi))
            shift = rng.uniform(-500.0, 500.0, 2)
            rot = rotation_matrix(angle)
            center = rot @ obb.center + shift
            moved = OBB(center[0], center[1], obb.w, obb.h, obb.theta + angle)
            for shrink in (False, True):
                before = gaussian_kernel(obb_to_gaussian(obb, shrink), point)
                after = gaussian_kernel(obb_to_gaussian(moved, shrink), rot @ point + shift)
                self.assertAlmostEqual(before, after, delta=1e-9)

    def test_kernel_survives_uniform_scale(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            obb = random_obb(rng, 200.0, 200.0)
            point = obb.center + rng.uniform(-80.0, 80.0, 2)
            k = float(rng.uniform(0.25, 4.0))
            scaled = OBB(k * obb.cx, k * obb.cy, k * obb.w, k * obb.h, obb.theta)
            for shrink in (False, True):
                before = gaussian_kernel(obb_to_gaussian(obb, shrink), point)
                after = gaussian_kernel(obb_to_gaussian(scaled, shrink), k * point)
                self.assertAlmostEqual(before, after, delta=1e-9)


class TestPolygons(unittest.TestCase):
    """Corners, IoU and containment."""

    def test_corners_counterclockwise(self):
        corners = obb_corners(OBB(0.0, 0.0, 4.0, 2.0, 0.5))
        self.assertGreater(signed_area(corners.vertices), 0.0)
        self.assertAlmostEqual(corners.area, 8.0, places=12)

    def test_axis_aligned_corners(self):
        corners = obb_corners(OBB(2.0, 1.0, 4.0, 2.0, 0.0)).vertices
        np.testing.assert_allclose(corners, [[0, 0], [4, 0], [4, 2], [0, 2]], atol=1e-12)

    def test_offset_unit_squares(self):
        a = Polygon(np.array([[0, 0], [1, 0], [1, 1], [0, 1]]))
        b = Polygon(np.array([[0.5, 0], [1.5, 0], [1.5, 1], [0.5, 1]]))
        self.assertAlmostEqual(polygon_iou(a, b), 1.0 / 3.0, places=12)

    def test_identical_and_disjoint(self):
        obb = OBB(10.0, 10.0, 6.0, 3.0, 0.4)
        self.assertAlmostEqual(obb_iou(obb, obb), 1.0, places=12)
        self.assertEqual(obb_iou(obb, obb.translated(100.0, 0.0)), 0.0)

    def test_iou_symmetric_and_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a = random_obb(rng, 100.0, 100.0, max_side=60.0)
            b = random_obb(rng, 100.0, 100.0, max_side=60.0)
            iou = obb_iou(a, b)
            self.assertGreaterEqual(iou, 0.0)
            self.assertLessEqual(iou, 1.0)
            self.assertAlmostEqual(iou, obb_iou(b, a), places=12)

    def test_degenerate_polygon_gives_zero(self):
        flat = Polygon(np.array([[0, 0], [1, 1], [2, 2], [3, 3]]))
        square = Polygon(np.array([[0, 0], [1, 0], [1, 1], [0, 1]]))
        self.assertEqual(polygon_iou(flat, square), 0.0)

    def test_point_containment(self):
        obb = OBB(0.0, 0.0, 10.0, 4.0, 0.0)
        self.assertTrue(point_in_obb(obb, (5.0, 2.0)))
        self.assertTrue(point_in_obb(obb, (0.0, 0.0)))
        self.assertFalse(point_in_obb(obb, (5.1, 0.0)))
        mask = points_in_obb(obb, np.array([[0.0, 0.0], [4.0, 1.0], [0.0, 3.0]]))
        self.assertEqual(mask.tolist(), [True, True, False])

    def test_iou_matches_sampled_area(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            a = random_obb(rng, 100.0, 100.0, min_side=20.0, max_side=60.0)
            b = OBB(a.cx + float(rng.uniform(-20, 20)), a.cy + float(rng.uniform(-20, 20)),
                    float(rng.uniform(20, 60)), float(rng.uniform(20, 60)), float(rng.uniform(0, HALF_PI)))
            pa = obb_corners(a).to_shapely()
            pb = obb_corners(b).to_shapely()
            x0, y0, x1, y1 = pa.union(pb).bounds
            # Cell midpoints of a 1000 x 1000 grid over the union's bounds
            xs = x0 + (np.arange(1000) + 0.5) * (x1 - x0) / 1000.0
            ys = y0 + (np.arange(1000) + 0.5) * (y1 - y0) / 1000.0
            xx, yy = np.meshgrid(xs, ys)
            in_a = shapely.contains_xy(pa, xx, yy)
            in_b = shapely.contains_xy(pb, xx, yy)
            sampled = np.count_nonzero(in_a & in_b) / np.count_nonzero(in_a | in_b)
            self.assertAlmostEqual(obb_iou(a, b), sampled, delta=1e-3)


class TestMinAreaRectangle(unittest.TestCase):
    """Hulls and minimum-area enclosing rectangles."""

    def test_rectangle_corners_recover_box(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            obb = random_obb(rng)
            rect = min_area_obb(obb_corners(obb))
            self.assertAlmostEqual(rect.area, obb.area, delta=1e-6 * obb.area)
            self.assertAlmostEqual(obb_iou(rect, obb), 1.0, places=6)

    def test_parallelogram_is_enclosed(self):
        quad = Polygon(np.array([[0, 0], [10, 0], [13, 4], [3, 4]]))
        rect = min_area_obb(quad)
        self.assertGreaterEqual(rect.area, quad.area - 1e-9)
        corners = obb_corners(rect)
        for vertex in quad.vertices:
            self.assertTrue(point_in_obb(rect, vertex), f"{vertex} outside {corners.vertices}")

    def test_collinear_points_rejected(self):
        with self.assertRaises(DegenerateGeometryError):
            convex_hull(np.array([[0, 0], [1, 1], [2, 2], [3, 3]]))
        with self.assertRaises(DegenerateGeometryError):
            min_area_obb(Polygon(np.array([[0, 0], [1, 0], [2, 0], [3, 0]])))

    def test_hull_drops_interior_point(self):
        hull = convex_hull(np.array([[0, 0], [4, 0], [4, 4], [0, 4], [2, 2]]))
        self.assertEqual(len(hull), 4)

    def test_corners_round_trip_parameters(self):
        rng = np.random.default_rng(16)
        checked = 0
        while checked < 200:
            obb = OBB(float(rng.uniform(0, 1000)), float(rng.uniform(0, 1000)),
                      float(rng.uniform(8, 200)), float(rng.uniform(8, 200)), float(rng.uniform(0.01, HALF_PI - 0.01)))
            if abs(obb.w - obb.h) < 1.0:
                continue
            np.testing.assert_allclose(min_area_obb(obb_corners(obb)).as_array(), obb.as_array(), rtol=0, atol=1e-9)
            checked += 1


if __name__ == '__main__':
    unittest.main()
