#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

import math
import unittest
import numpy as np
from pyhead.general.exceptions import ValidationError, DegenerateGeometryError
from pyhead.general.geometry.boxes import BBox
from pyhead.general.geometry.rotation import axis_angle_to_matrix, rot6d_to_matrix
from pyhead.optimisation import losses
from pyhead.optimisation.losses import LossWeights


def unit_cube_oracle(points):
    points = np.asarray(points, dtype=float)
    extent = [max(points[:, a]) - min(points[:, a]) for a in range(3)]
    s = max(extent)
    result = np.zeros_like(points)
    for a in range(3):
        centre = 0.5 * (max(points[:, a]) + min(points[:, a]))
        result[:, a] = (points[:, a] - centre) / s + 0.5
    return result


class Test_LossWeights(unittest.TestCase):

    def test_defaults(self):
        self.assertEqual(LossWeights().as_tuple(), (50.0, 1.0, 1.0, 0.5, 2.5))
        self.assertEqual(list(LossWeights().to_dict().keys()), ['w_3d', 'w_rot', 'w_reproj', 'w_cls', 'w_reg'])
        self.assertEqual(LossWeights.from_dict(LossWeights(w_rot=3.0).to_dict()).w_rot, 3.0)

    def test_ablated(self):
        weights = LossWeights().ablated('rot')
        self.assertEqual(weights.as_tuple(), (50.0, 0.0, 1.0, 0.5, 2.5))
        self.assertRaises(ValidationError, LossWeights().ablated, 'pose')

    def test_invalid(self):
        self.assertRaises(ValidationError, LossWeights, w_3d=-1.0)
        self.assertRaises(ValidationError, LossWeights, w_reg=np.inf)


class Test_reprojection_loss(unittest.TestCase):

    def test_values(self):
        gt = np.array([[0.0, 0.0], [5.0, 2.0], [-1.0, 3.0]])
        result = losses.reprojection_loss(gt, gt)
        self.assertEqual(result['loss [px]'], 0.0)
        np.testing.assert_array_equal(result['gradient [-]'], np.zeros((3, 2)))
        self.assertEqual(losses.reprojection_loss(gt + [1.0, 0.0], gt)['loss [px]'], 1.0)
        self.assertEqual(losses.reprojection_loss(gt + [3.0, 4.0], gt)['loss [px]'], 7.0)
        np.testing.assert_array_equal(losses.reprojection_loss(gt - [3.0, 0.0], gt)['gradient [-]'][0],
                                      [-1.0 / 3.0, 0.0])

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, losses.reprojection_loss, np.zeros((3, 2)), np.zeros((2, 2)),
                          fail_silently=False)
        self.assertRaises(ValidationError, losses.reprojection_loss, np.zeros((0, 2)), np.zeros((0, 2)),
                          fail_silently=False)

    def test_fail_silently(self):
        self.assertTrue(np.isnan(losses.reprojection_loss(np.zeros((3, 2)), np.zeros((2, 2)))['loss [px]']))


class Test_normalize_unit_cube(unittest.TestCase):

    def test_values(self):
        cube = np.array([[0.0, 0.0, 0.0], [2.0, 2.0, 2.0]])
        np.testing.assert_array_equal(losses.normalize_unit_cube(cube)['vertices [-]'], [[0.0] * 3, [1.0] * 3])
        box = np.array([[0.0, 0.0, 0.0], [4.0, 2.0, 1.0]])
        np.testing.assert_allclose(losses.normalize_unit_cube(box)['vertices [-]'],
                                   [[0.0, 0.25, 0.375], [1.0, 0.75, 0.625]], atol=1e-15)

    def test_longest_edge(self):
        rng = np.random.RandomState(0)
        for _ in range(20):
            points = rng.standard_normal((30, 3)) * rng.uniform(0.1, 10.0, 3) + rng.uniform(-5.0, 5.0, 3)
            result = losses.normalize_unit_cube(points)['vertices [-]']
            extent = result.max(axis=0) - result.min(axis=0)
            self.assertAlmostEqual(extent.max(), 1.0, delta=1e-12)
            self.assertTrue(np.all(result >= -1e-12) and np.all(result <= 1.0 + 1e-12))
            np.testing.assert_allclose(result, unit_cube_oracle(points), atol=1e-12)

    def test_fail_with_error(self):
        self.assertRaises(DegenerateGeometryError, losses.normalize_unit_cube, np.ones((4, 3)),
                          fail_silently=False)
        self.assertRaises(DegenerateGeometryError, losses.normalize_unit_cube, np.ones((1, 3)),
                          fail_silently=False)


class Test_vertices_loss_3d(unittest.TestCase):

    def test_values(self):
        rng = np.random.RandomState(1)
        gt = rng.standard_normal((40, 3))
        self.assertEqual(losses.vertices_loss_3d(gt, gt)['loss [-]'], 0.0)
        self.assertAlmostEqual(losses.vertices_loss_3d(2.0 * gt, gt)['loss [-]'], 0.0, delta=1e-12)
        self.assertAlmostEqual(losses.vertices_loss_3d(gt + [3.0, -1.0, 2.0], gt)['loss [-]'], 0.0, delta=1e-12)
        np.testing.assert_array_equal(losses.vertices_loss_3d(gt, gt)['gradient [-]'], np.zeros((40, 3)))

    def test_oracle(self):
        rng = np.random.RandomState(2)
        pred, gt = rng.standard_normal((25, 3)), rng.standard_normal((25, 3))
        expected = np.mean(np.linalg.norm(unit_cube_oracle(pred) - unit_cube_oracle(gt), axis=1))
        self.assertAlmostEqual(losses.vertices_loss_3d(pred, gt)['loss [-]'], expected, delta=1e-12)

    def test_gradient(self):
        rng = np.random.RandomState(3)
        pred, gt = rng.standard_normal((10, 3)), rng.standard_normal((10, 3))
        result = losses.vertices_loss_3d(pred, gt)
        frozen = result['pred_normalization [-]']

        def f(x):
            return losses.vertices_loss_3d(x, gt, pred_normalization=frozen)['loss [-]']

        self.assertLessEqual(losses.finite_difference_check(f, pred, result['gradient [-]'])[
                                 'max_relative_error [-]'], 1e-4)

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, losses.vertices_loss_3d, np.zeros((3, 3)), np.zeros((4, 3)),
                          fail_silently=False)
        self.assertRaises(DegenerateGeometryError, losses.vertices_loss_3d, np.zeros((3, 3)),
                          np.random.RandomState(0).standard_normal((3, 3)), fail_silently=False)


class Test_rotation_loss(unittest.TestCase):

    def test_values(self):
        self.assertEqual(losses.rotation_loss(np.eye(3), np.eye(3))['loss [rad]'], 0.0)
        quarter = axis_angle_to_matrix([0.5 * np.pi, 0.0, 0.0])['rotation_matrix [-]']
        self.assertAlmostEqual(losses.rotation_loss(np.eye(3), quarter)['loss [rad]'], 0.5 * np.pi, places=12)

    def test_gradient_finite_at_identity(self):
        self.assertTrue(np.all(np.isfinite(losses.rotation_loss(np.eye(3), np.eye(3))['gradient [-]'])))

    def test_gradient(self):
        rng = np.random.RandomState(4)
        r_pred = rot6d_to_matrix(rng.standard_normal(6))['rotation_matrix [-]']
        r_gt = r_pred @ axis_angle_to_matrix([0.3, -0.8, 0.5])['rotation_matrix [-]']

        def f(x):
            return losses.rotation_loss(x, r_gt, validate=False)['loss [rad]']

        gradient = losses.rotation_loss(r_pred, r_gt)['gradient [-]']
        self.assertLessEqual(losses.finite_difference_check(f, r_pred, gradient)['max_relative_error [-]'], 1e-5)


class Test_focal_loss(unittest.TestCase):

    def test_values(self):
        self.assertAlmostEqual(losses.focal_loss(0.5, 1, alpha_f=1.0, gamma=0.0)['loss [-]'], math.log(2.0),
                               places=12)
        self.assertAlmostEqual(losses.focal_loss(1.0 - 1e-7, 1)['loss [-]'], 0.0, places=12)
        self.assertAlmostEqual(losses.focal_loss(0.9, 1, alpha_f=0.25, gamma=2.0)['loss [-]'],
                               0.25 * 0.1 ** 2 * -math.log(0.9), places=15)
        self.assertAlmostEqual(losses.focal_loss(0.9, 1)['loss [-]'], 2.6341e-4, places=7)
        self.assertAlmostEqual(losses.focal_loss(0.2, 0, alpha_f=0.25, gamma=2.0)['loss [-]'],
                               0.75 * 0.2 ** 2 * -math.log(0.8), places=15)

    def test_clamp(self):
        self.assertTrue(np.isfinite(losses.focal_loss(0.0, 1)['loss [-]']))
        self.assertEqual(losses.focal_loss(0.0, 1)['gradient [-]'], 0.0)
        self.assertEqual(losses.focal_loss(1.0, 0)['gradient [-]'], 0.0)

    def test_gradient(self):
        for p, y, alpha_f, gamma in ((0.3, 1, 0.25, 2.0), (0.7, 0, 0.4, 1.5), (0.5, 1, 0.9, 0.0)):
            def f(x):
                return losses.focal_loss(float(x[0]), y, alpha_f, gamma)['loss [-]']
            gradient = losses.focal_loss(p, y, alpha_f, gamma)['gradient [-]']
            self.assertLessEqual(losses.finite_difference_check(f, [p], [gradient])['max_relative_error [-]'], 1e-6)

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, losses.focal_loss, 1.5, 1)
        self.assertRaises(ValidationError, losses.focal_loss, 0.5, 2)


class Test_ciou_loss(unittest.TestCase):

    def test_values(self):
        box = BBox(0.0, 0.0, 2.0, 3.0)
        self.assertEqual(losses.ciou_loss(box, box)['loss [-]'], 0.0)
        result = losses.ciou_loss(BBox(0.0, 0.0, 2.0, 2.0), BBox(1.0, 1.0, 3.0, 3.0))
        self.assertAlmostEqual(result['loss [-]'], 1.0 - 1.0 / 7.0 + 1.0 / 9.0, places=12)
        self.assertAlmostEqual(result['loss [-]'], 0.96825, places=5)
        self.assertAlmostEqual(result['iou [-]'], 1.0 / 7.0, places=12)
        self.assertGreater(losses.ciou_loss(BBox(0.0, 0.0, 1.0, 1.0), BBox(50.0, 50.0, 52.0, 51.0))['loss [-]'],
                           1.0)

    def test_gradient(self):
        pred, gt = BBox(1.0, 2.0, 5.5, 4.0), BBox(2.3, 0.7, 6.1, 5.2)
        result = losses.ciou_loss(pred, gt)

        def f(x):
            return losses.ciou_loss(BBox(*x), gt, alpha_v=result['alpha_v [-]'])['loss [-]']

        self.assertLessEqual(losses.finite_difference_check(f, pred.as_array(), result['gradient [-]'])[
                                 'max_relative_error [-]'], 1e-4)

    def test_gradient_disjoint(self):
        pred, gt = BBox(0.0, 0.0, 1.0, 3.0), BBox(4.0, 5.0, 6.0, 6.5)
        result = losses.ciou_loss(pred, gt)

        def f(x):
            return losses.ciou_loss(BBox(*x), gt, alpha_v=result['alpha_v [-]'])['loss [-]']

        self.assertLessEqual(losses.finite_difference_check(f, pred.as_array(), result['gradient [-]'])[
                                 'max_relative_error [-]'], 1e-4)

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, losses.ciou_loss, BBox(0.0, 0.0, 0.0, 1.0), BBox(0.0, 0.0, 1.0, 1.0),
                          fail_silently=False)
        self.assertRaises(ValidationError, losses.ciou_loss, [0.0, 0.0, 1.0, 1.0], BBox(0.0, 0.0, 1.0, 1.0))


class Test_total_loss(unittest.TestCase):

    def test_values(self):
        self.assertEqual(losses.total_loss(1.0, 1.0, 1.0, 1.0, 1.0)['total [-]'], 55.0)
        self.assertEqual(losses.total_loss(0.0, 0.0, 0.0, 0.0, 0.0)['total [-]'], 0.0)

    def test_dot_product(self):
        rng = np.random.RandomState(5)
        components = rng.uniform(0.0, 3.0, 5)
        weights = LossWeights(*rng.uniform(0.0, 10.0, 5))
        result = losses.total_loss(*components, weights=weights)
        self.assertAlmostEqual(result['total [-]'], float(np.dot(components, weights.as_tuple())), delta=1e-12)
        breakdown = result['breakdown [-]']
        self.assertEqual(breakdown.components(), tuple(components))
        self.assertEqual(breakdown.to_dict()['total'], result['total [-]'])

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, losses.total_loss, 1.0, 1.0, 1.0, 1.0, 1.0, weights=(1.0,) * 5)


class Test_finite_difference_check(unittest.TestCase):

    def test_values(self):
        result = losses.finite_difference_check(lambda x: float(x[0] ** 2), 3.0, 6.0)
        self.assertLessEqual(result['max_relative_error [-]'], 1e-9)

    def test_reprojection(self):
        rng = np.random.RandomState(6)
        gt = rng.uniform(0.0, 50.0, (6, 2))
        pred = gt + rng.uniform(0.5, 2.0, (6, 2)) * rng.choice([-1.0, 1.0], (6, 2))
        gradient = losses.reprojection_loss(pred, gt)['gradient [-]']
        result = losses.finite_difference_check(lambda x: losses.reprojection_loss(x, gt)['loss [px]'], pred,
                                                gradient)
        self.assertLessEqual(result['max_relative_error [-]'], 1e-6)

    def test_planted_fault(self):
        result = losses.finite_difference_check(lambda x: float(np.sum(x ** 3)), [1.0, 2.0], [6.0, 24.0])
        self.assertAlmostEqual(result['max_relative_error [-]'], 0.5, delta=1e-6)
