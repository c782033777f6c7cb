#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

import unittest
import numpy as np
from pyhead.general.exceptions import ValidationError
from pyhead.general.geometry.rotation import axis_angle_to_matrix
from pyhead.model.assets import HeadParams, generate_toy_assets, sample_params
from pyhead.model.synthesis import forward_canonical, forward_canonical_vjp, select

ASSETS = generate_toy_assets(7, 162, 4, 2, 16)


def forward_loop(assets, params):
    # straightforward per-vertex evaluation
    r_jaw = axis_angle_to_matrix(params.jaw)['rotation_matrix [-]']
    p = assets.jaw_pivot
    result = np.zeros((assets.n_vertices, 3))
    for i in range(assets.n_vertices):
        v = assets.template[i].copy()
        for k in range(assets.k_shape):
            v = v + params.shape[k] * assets.shape_basis[k, i]
        for j in range(assets.k_expr):
            v = v + params.expression[j] * assets.expr_basis[j, i]
        w = assets.jaw_weights[i]
        result[i] = p + (1.0 - w) * (v - p) + w * (r_jaw @ (v - p))
    return result


class Test_forward_canonical(unittest.TestCase):

    def test_values(self):
        params = HeadParams.zeros(4, 2)
        np.testing.assert_array_equal(forward_canonical(ASSETS, params)['vertices [model]'], ASSETS.template)
        params.shape[0] = 1.0
        np.testing.assert_allclose(forward_canonical(ASSETS, params)['vertices [model]'],
                                   ASSETS.template + ASSETS.shape_basis[0], atol=1e-15)

    def test_loop_oracle(self):
        for seed in range(5):
            params = sample_params(ASSETS, seed, jaw_sigma=0.3)
            np.testing.assert_allclose(forward_canonical(ASSETS, params)['vertices [model]'],
                                       forward_loop(ASSETS, params), atol=1e-12)

    def test_linearity(self):
        rng = np.random.RandomState(0)
        params = HeadParams.zeros(4, 2)
        direction = rng.standard_normal(4)
        params.shape = direction
        base = forward_canonical(ASSETS, params)['vertices [model]'] - ASSETS.template
        for alpha in (-2.0, 0.5, 3.0):
            params.shape = alpha * direction
            np.testing.assert_allclose(forward_canonical(ASSETS, params)['vertices [model]'] - ASSETS.template,
                                       alpha * base, atol=1e-12)

    def test_jaw_locality(self):
        params = sample_params(ASSETS, 3, jaw_sigma=0.5)
        result = forward_canonical(ASSETS, params)
        fixed = ASSETS.jaw_weights == 0.0
        np.testing.assert_array_equal(result['vertices [model]'][fixed], result['blended [model]'][fixed])
        self.assertFalse(np.allclose(result['vertices [model]'][~fixed], result['blended [model]'][~fixed]))

    def test_fail_silently(self):
        self.assertIsNone(forward_canonical(ASSETS, HeadParams.zeros(3, 2))['vertices [model]'])

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, forward_canonical, ASSETS, HeadParams.zeros(3, 2), fail_silently=False)
        self.assertRaises(ValidationError, forward_canonical, ASSETS, np.zeros(18))


class Test_forward_canonical_vjp(unittest.TestCase):

    def test_values(self):
        rng = np.random.RandomState(1)
        params = sample_params(ASSETS, 5, jaw_sigma=0.3)
        weights = rng.standard_normal((ASSETS.n_vertices, 3))
        gradient = forward_canonical_vjp(ASSETS, params, weights)

        def f(p):
            return np.sum(weights * forward_canonical(ASSETS, p)['vertices [model]'])

        for name, size in (('shape', 4), ('expression', 2), ('jaw', 3)):
            numerical = np.zeros(size)
            for i in range(size):
                plus, minus = params.copy(), params.copy()
                getattr(plus, name)[i] += 1e-6
                getattr(minus, name)[i] -= 1e-6
                numerical[i] = (f(plus) - f(minus)) / 2e-6
            np.testing.assert_allclose(gradient[name], numerical, rtol=1e-6, atol=1e-7)

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, forward_canonical_vjp, ASSETS, HeadParams.zeros(4, 2), np.zeros((3, 3)))


class Test_select(unittest.TestCase):

    def test_values(self):
        rows = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        np.testing.assert_array_equal(select([0, 1, 2], rows), rows)
        np.testing.assert_array_equal(select([2, 0], rows), rows[[2, 0]])
        self.assertEqual(select(ASSETS.face_indices, ASSETS.template).shape[0], ASSETS.face_indices.size)

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, select, [3], np.zeros((3, 2)))
