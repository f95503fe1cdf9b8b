"""
Unit tests for rotated NMS and patch merging.
"""
import unittest

import numpy as np

from obbassign.geometry import OBB, obb_iou
from obbassign.postprocess import Detection, PatchOrigin, filter_by_score, merge_patches, rotated_nms
from obbassign.tests.fixtures.test_data import random_detections


class TestRotatedNMS(unittest.TestCase):

    def test_duplicates_keep_highest(self):
        obb = OBB(50, 50, 30, 10, 0.4)
        dets = [Detection(obb, 0, 0.6), Detection(obb, 0, 0.9), Detection(obb, 0, 0.3)]
        kept = rotated_nms(dets, 0.1)
        self.assertEqual(kept, [dets[1]])

    def test_classes_do_not_suppress_each_other(self):
        obb = OBB(50, 50, 30, 10, 0.4)
        kept = rotated_nms([Detection(obb, 0, 0.9), Detection(obb, 1, 0.8)], 0.1)
        self.assertEqual(len(kept), 2)

    def test_iou_equal_to_threshold_suppresses(self):
        a = OBB(0.5, 0.5, 1.0, 1.0, 0.0)
        b = OBB(1.0, 0.5, 1.0, 1.0, 0.0)
        threshold = obb_iou(b, a)
        self.assertAlmostEqual(threshold, 1.0 / 3.0, places=9)
        dets = [Detection(a, 0, 0.9), Detection(b, 0, 0.8)]
        self.assertEqual(len(rotated_nms(dets, threshold)), 1)
        self.assertEqual(len(rotated_nms(dets, threshold + 1e-9)), 2)

    def test_disjoint_boxes_survive(self):
        dets = [Detection(OBB(x, 0, 10, 10, 0), 0, 0.5) for x in (0, 50, 100)]
        self.assertEqual(len(rotated_nms(dets)), 3)

    def test_descending_scores_and_idempotent(self):
        rng = np.random.default_rng(1)
        dets = random_detections(rng, 120)
        kept = rotated_nms(dets, 0.1)
        scores = [d.score for d in kept]
        self.assertEqual(scores, sorted(scores, reverse=True))
        self.assertEqual(rotated_nms(kept, 0.1), kept)

    def test_score_ties_keep_input_order(self):
        obb = OBB(0, 0, 10, 10, 0)
        dets = [Detection(obb, 0, 0.5), Detection(obb.translated(1, 0), 0, 0.5)]
        self.assertEqual(rotated_nms(dets, 0.1), [dets[0]])

    def test_threshold_range(self):
        with self.assertRaises(ValueError):
            rotated_nms([], 1.5)

    def test_detection_validation(self):
        with self.assertRaises(ValueError):
            Detection(OBB(0, 0, 1, 1, 0), 0, 1.5)
        with self.assertRaises(ValueError):
            Detection(OBB(0, 0, 1, 1, 0), -1, 0.5)


class TestScoreFilter(unittest.TestCase):

    def test_threshold_is_inclusive(self):
        obb = OBB(0, 0, 1, 1, 0)
        dets = [Detection(obb, 0, 0.1), Detection(obb, 0, 0.0999), Detection(obb, 0, 0.5)]
        self.assertEqual([d.score for d in filter_by_score(dets, 0.1)], [0.1, 0.5])


class TestMergePatches(unittest.TestCase):

    def test_offsets_move_to_source(self):
        local = Detection(OBB(10, 20, 8, 4, 0.2), 2, 0.7)
        merged = merge_patches([(PatchOrigin(512, 1024), [local])])
        self.assertEqual(len(merged), 1)
        self.assertEqual((merged[0].obb.cx, merged[0].obb.cy), (522.0, 1044.0))
        self.assertEqual(merged[0].obb.theta, 0.2)
        self.assertEqual(merged[0].class_index, 2)

    def test_scaled_patch_maps_back(self):
        local = Detection(OBB(10, 20, 8, 4, 0.0), 0, 0.7)
        merged = merge_patches([(PatchOrigin(100, 0, 0.5), [local])])
        obb = merged[0].obb
        self.assertEqual((obb.cx, obb.cy, obb.w, obb.h), (220.0, 40.0, 16.0, 8.0))

    def test_overlap_between_patches_is_suppressed(self):
        # The same object seen by two overlapping windows
        a = Detection(OBB(600, 100, 40, 20, 0.3), 0, 0.9)
        b = Detection(OBB(88, 100, 40, 20, 0.3), 0, 0.8)
        merged = merge_patches([(PatchOrigin(0, 0), [a]), (PatchOrigin(512, 0), [b])], 0.1, 0.1)
        self.assertEqual(len(merged), 1)
        self.assertEqual(merged[0].score, 0.9)

    def test_low_scores_dropped(self):
        dets = [Detection(OBB(10, 10, 5, 5, 0), 0, 0.05), Detection(OBB(50, 50, 5, 5, 0), 0, 0.01)]
        self.assertEqual(merge_patches([(PatchOrigin(), dets)], 0.1, 0.1), [])

    def test_patch_order_does_not_matter(self):
        rng = np.random.default_rng(8)
        patches = []
        for x0 in (0, 512, 1024):
            dets = [
                Detection(d.obb, d.class_index, round(d.score, 2))
                for d in random_detections(rng, 30, image_size=1024.0)
            ]
            patches.append((PatchOrigin(x0, 0), dets))
        forward = merge_patches(patches)
        backward = merge_patches(list(reversed(patches)))
        self.assertEqual(forward, backward)

    def test_origin_validation(self):
        with self.assertRaises(ValueError):
            PatchOrigin(-1, 0)
        with self.assertRaises(ValueError):
            PatchOrigin(0, 0, 0.0)


if __name__ == '__main__':
    unittest.main()
