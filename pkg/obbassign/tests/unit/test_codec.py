"""
Unit tests for regression decoding.
"""
import math
import unittest

import numpy as np

from obbassign.codec import DecodeParams, RawRegression, decode_regression, elu, elu_plus_one, wrap_angle
from obbassign.geometry import HALF_PI


class TestDecode(unittest.TestCase):
    """decode_regression contract."""

    def test_zero_output_is_stride_square_at_point(self):
        obb = decode_regression(RawRegression(0, 0, 0, 0, 0), (100.0, 50.0), DecodeParams(stride=16))
        self.assertEqual((obb.cx, obb.cy, obb.w, obb.h, obb.theta), (100.0, 50.0, 16.0, 16.0, 0.0))

    def test_offsets_scale_with_k_and_stride(self):
        obb = decode_regression(RawRegression(0.5, -0.25, 0, 0, 0), (100.0, 100.0), DecodeParams(stride=8, k=2.0))
        self.assertEqual(obb.cx, 108.0)
        self.assertEqual(obb.cy, 96.0)

    def test_positive_side_is_linear(self):
        obb = decode_regression(RawRegression(0, 0, 1.5, 0.25, 0.3), (0.0, 0.0), DecodeParams(stride=8))
        self.assertAlmostEqual(obb.w, 20.0)
        self.assertAlmostEqual(obb.h, 10.0)
        self.assertAlmostEqual(obb.theta, 0.3)

    def test_negative_side_uses_exponential(self):
        obb = decode_regression(RawRegression(0, 0, -1.0, -2.0, 0), (0.0, 0.0), DecodeParams(stride=32))
        self.assertAlmostEqual(obb.w, 32.0 * math.exp(-1.0), places=12)
        self.assertAlmostEqual(obb.h, 32.0 * math.exp(-2.0), places=12)

    def test_extreme_negative_side_stays_positive(self):
        obb = decode_regression(RawRegression(0, 0, -1000.0, -745.5, 0), (0.0, 0.0), DecodeParams(stride=8))
        self.assertGreater(obb.w, 0.0)
        self.assertGreater(obb.h, 0.0)

    def test_random_outputs_always_valid(self):
        rng = np.random.default_rng(0)
        raws = rng.normal(0.0, 5.0, size=(100000, 5))
        raws[::50, 2:4] = rng.uniform(-800.0, 50.0, size=(2000, 2))
        params = DecodeParams(stride=8, k=1.0)
        violations = 0
        for values in raws:
            obb = decode_regression(RawRegression(*values), (512.0, 512.0), params)
            if not (obb.w > 0 and obb.h > 0 and 0.0 <= obb.theta < HALF_PI):
                violations += 1
        self.assertEqual(violations, 0)

    def test_angle_does_not_swap_sides(self):
        obb = decode_regression(RawRegression(0, 0, 1.0, 0.0, 2.0), (0.0, 0.0), DecodeParams(stride=8))
        self.assertAlmostEqual(obb.w, 16.0)
        self.assertAlmostEqual(obb.h, 8.0)
        self.assertAlmostEqual(obb.theta, 2.0 - HALF_PI, places=12)

    def test_invalid_inputs_rejected(self):
        with self.assertRaises(ValueError):
            RawRegression(float('nan'), 0, 0, 0, 0)
        with self.assertRaises(ValueError):
            DecodeParams(stride=8, k=0.0)
        with self.assertRaises(ValueError):
            DecodeParams(stride=0)


class TestHelpers(unittest.TestCase):

    def test_elu(self):
        self.assertEqual(elu(2.0), 2.0)
        self.assertEqual(elu(0.0), 0.0)
        self.assertAlmostEqual(elu(-1.0), math.exp(-1.0) - 1.0, places=15)
        self.assertAlmostEqual(elu_plus_one(-1.0), elu(-1.0) + 1.0, places=15)
        self.assertGreater(elu_plus_one(-1e6), 0.0)

    def test_wrap_angle(self):
        self.assertEqual(wrap_angle(0.0), 0.0)
        self.assertEqual(wrap_angle(HALF_PI), 0.0)
        self.assertAlmostEqual(wrap_angle(-0.1), HALF_PI - 0.1, places=12)
        self.assertAlmostEqual(wrap_angle(3 * HALF_PI + 0.2), 0.2, places=12)
        tiny = wrap_angle(-1e-20)
        self.assertTrue(0.0 <= tiny < HALF_PI)


if __name__ == '__main__':
    unittest.main()
