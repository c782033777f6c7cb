#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

import unittest
import numpy as np
from pyhead.general.exceptions import ValidationError
from pyhead.general.geometry.boxes import BBox, iou


class Test_BBox(unittest.TestCase):

    def test_properties(self):
        box = BBox(1.0, 2.0, 4.0, 6.0)
        self.assertEqual(box.width, 3.0)
        self.assertEqual(box.height, 4.0)
        self.assertEqual(box.area, 12.0)
        self.assertEqual(box.center, (2.5, 4.0))
        self.assertFalse(box.is_degenerate)
        self.assertTrue(BBox(3.0, 3.0, 3.0, 3.0).is_degenerate)

    def test_invalid(self):
        self.assertRaises(ValidationError, BBox, 2.0, 0.0, 1.0, 1.0)
        self.assertRaises(ValidationError, BBox, 0.0, 0.0, np.inf, 1.0)
        self.assertRaises(ValidationError, BBox.from_list, [0.0, 0.0, 1.0])
        self.assertRaises(ValidationError, BBox.from_points, np.zeros((0, 2)))

    def test_from_points(self):
        self.assertEqual(BBox.from_points([[0.0, 0.0], [4.0, 2.0]]), BBox(0.0, 0.0, 4.0, 2.0))
        self.assertEqual(BBox.from_points([[3.0, 3.0]]), BBox(3.0, 3.0, 3.0, 3.0))

    def test_clamp(self):
        self.assertEqual(BBox(-5.0, 10.0, 50.0, 120.0).clamp(40.0, 100.0), BBox(0.0, 10.0, 40.0, 100.0))

    def test_flip_horizontal(self):
        box = BBox(10.0, 5.0, 30.0, 25.0)
        self.assertEqual(box.flip_horizontal(100.0), BBox(70.0, 5.0, 90.0, 25.0))
        self.assertEqual(box.flip_horizontal(100.0).flip_horizontal(100.0), box)

    def test_contains(self):
        self.assertTrue(BBox(0.0, 0.0, 10.0, 10.0).contains(BBox(0.0, 2.0, 10.0, 3.0)))
        self.assertFalse(BBox(0.0, 0.0, 10.0, 10.0).contains(BBox(5.0, 5.0, 11.0, 6.0)))


class Test_iou(unittest.TestCase):

    def test_values(self):
        self.assertAlmostEqual(iou(BBox(0.0, 0.0, 2.0, 2.0), BBox(1.0, 1.0, 3.0, 3.0))['iou [-]'], 1.0 / 7.0)
        self.assertEqual(iou(BBox(0.0, 0.0, 2.0, 2.0), BBox(0.0, 0.0, 2.0, 2.0))['iou [-]'], 1.0)
        self.assertEqual(iou(BBox(0.0, 0.0, 1.0, 1.0), BBox(2.0, 2.0, 3.0, 3.0))['iou [-]'], 0.0)
        self.assertEqual(iou(BBox(0.0, 0.0, 1.0, 1.0), BBox(1.0, 0.0, 2.0, 1.0))['intersection [px2]'], 0.0)

    def test_degenerate(self):
        point = BBox(1.0, 1.0, 1.0, 1.0)
        self.assertEqual(iou(point, point)['iou [-]'], 0.0)

    def test_symmetry(self):
        rng = np.random.RandomState(0)
        for _ in range(100):
            a = BBox.from_points(rng.uniform(0.0, 10.0, (2, 2)))
            b = BBox.from_points(rng.uniform(0.0, 10.0, (2, 2)))
            self.assertEqual(iou(a, b)['iou [-]'], iou(b, a)['iou [-]'])
            self.assertTrue(0.0 <= iou(a, b)['iou [-]'] <= 1.0)

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, iou, [0.0, 0.0, 1.0, 1.0], BBox(0.0, 0.0, 1.0, 1.0))
