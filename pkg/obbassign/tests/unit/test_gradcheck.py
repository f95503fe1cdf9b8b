"""
Unit tests for the gradient check helpers.
"""
import unittest

import numpy as np
import pytest

from obbassign.gradcheck import (
    MAX_LOSS,
    MIN_LOSS,
    GradcheckReport,
    central_difference,
    relative_error,
    run_gradcheck,
    sample_pairs,
)
from obbassign.losses import prob_iou_loss


class TestGradcheckHelpers(unittest.TestCase):

    def test_central_difference_of_quadratic(self):
        grad = central_difference(lambda x: float(x[0] ** 2 + 3 * x[1]), np.array([2.0, -1.0]))
        np.testing.assert_allclose(grad, [4.0, 3.0], rtol=1e-8)

    def test_relative_error_uses_floor(self):
        errors = relative_error(np.array([1.0, 1e-9]), np.array([1.001, 0.0]))
        self.assertAlmostEqual(errors[0], 0.001 / 1.001, places=12)
        self.assertAlmostEqual(errors[1], 1e-9 / 1e-4, places=15)

    def test_pairs_are_seeded_and_in_range(self):
        first = sample_pairs(20, seed=3)
        second = sample_pairs(20, seed=3)
        self.assertEqual(first, second)
        for pred, gt in first:
            self.assertTrue(MIN_LOSS <= prob_iou_loss(pred, gt) <= MAX_LOSS)

    def test_report_format(self):
        report = GradcheckReport(count=2, seed=0, step=1e-5, tolerance=1e-4, max_rel_error=2.5e-7,
                                 worst_pair=1, worst_component=4)
        self.assertTrue(report.passed)
        self.assertEqual(report.format(), (
            "pairs 2\n"
            "seed 0\n"
            "step 1.0e-05\n"
            "tolerance 1.0e-04\n"
            "max_rel_error 2.500000e-07\n"
            "worst_pair 1\n"
            "worst_component theta\n"
            "status ok\n"
        ))

    def test_failed_report(self):
        report = GradcheckReport(count=1, seed=0, step=1e-5, tolerance=1e-4, max_rel_error=0.5,
                                 worst_pair=0, worst_component=0)
        self.assertFalse(report.passed)
        self.assertTrue(report.format().endswith("status fail\n"))


class TestRunGradcheck(unittest.TestCase):

    def test_passes_on_seeded_pairs(self):
        report = run_gradcheck(200, seed=0)
        self.assertTrue(report.passed, report.format())
        self.assertLessEqual(report.max_rel_error, 1e-4)

    @pytest.mark.slow
    def test_passes_on_thousand_pairs(self):
        report = run_gradcheck(1000, seed=0)
        self.assertEqual(report.count, 1000)
        self.assertTrue(report.passed, report.format())

    def test_guard_reaches_loss(self):
        report = run_gradcheck(25, seed=5, eps=1e-9)
        self.assertTrue(report.passed, report.format())

    def test_deterministic(self):
        self.assertEqual(run_gradcheck(25, seed=5).format(), run_gradcheck(25, seed=5).format())

    def test_count_must_be_positive(self):
        with self.assertRaises(ValueError):
            run_gradcheck(0, seed=0)


if __name__ == '__main__':
    unittest.main()
