#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

import unittest
import numpy as np
from pyhead.model.assets import generate_toy_assets
from pyhead.optimisation import gradcheck
from pyhead.optimisation.losses import LossWeights


class Test_run_gradient_checks(unittest.TestCase):

    def test_values(self):
        assets = generate_toy_assets(0, 80, 3, 2, 10)
        results = gradcheck.run_gradient_checks(seed=0, n_points=100, assets=assets)
        self.assertEqual(list(results.keys()), ['reprojection', 'vertices_3d', 'rotation', 'focal', 'ciou',
                                                'objective'])
        for name, error in results.items():
            self.assertLessEqual(error, gradcheck.GRADIENT_TOLERANCE, msg=name)

    def test_determinism(self):
        self.assertEqual(gradcheck.check_focal(np.random.RandomState(3)),
                         gradcheck.check_focal(np.random.RandomState(3)))


class Test_check_objective(unittest.TestCase):

    def test_ablated_weights(self):
        assets = generate_toy_assets(2, 80, 3, 2, 10)
        for term in ('3d', 'rot', 'reproj'):
            error = gradcheck.check_objective(np.random.RandomState(5), assets, LossWeights().ablated(term))
            self.assertLessEqual(error, gradcheck.GRADIENT_TOLERANCE, msg=term)
