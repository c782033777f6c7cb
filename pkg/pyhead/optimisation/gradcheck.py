#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import logging
from collections import OrderedDict

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general.geometry.boxes import BBox
from pyhead.general.geometry.rotation import rot6d_to_matrix, geodesic_distance
from pyhead.model.assets import HeadParams, generate_toy_assets, sample_params
from pyhead.optimisation.losses import (
    LossWeights, reprojection_loss, vertices_loss_3d, rotation_loss, focal_loss, ciou_loss, finite_difference_check)
from pyhead.optimisation.fitting import FitTargets, objective_and_gradient, predicted_targets

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-4


def _random_rotation(rng):
    while True:
        try:
            return rot6d_to_matrix(rng.standard_normal(6), validate=False, fail_silently=False)['rotation_matrix [-]']
        except ValueError:
            continue


def _random_box(rng):
    x1, y1 = rng.uniform(0.0, 10.0, 2)
    w, h = rng.uniform(1.0, 6.0, 2)
    return BBox(x1, y1, x1 + w, y1 + h)


def _separated(a, b, gap=1e-3):
    # keeps the point away from the kinks of the min/max terms
    xs = [a.x1, a.x2, b.x1, b.x2]
    ys = [a.y1, a.y2, b.y1, b.y2]
    return all(abs(u - v) > gap for values in (xs, ys) for i, u in enumerate(values) for v in values[i + 1:])


def check_reprojection(rng, n_points=8):
    gt = rng.uniform(0.0, 100.0, (n_points, 2))
    offsets = rng.uniform(0.1, 2.0, (n_points, 2)) * rng.choice([-1.0, 1.0], (n_points, 2))
    pred = gt + offsets

    def f(x):
        return reprojection_loss(x, gt, validate=False, fail_silently=False)['loss [px]']

    gradient = reprojection_loss(pred, gt, validate=False, fail_silently=False)['gradient [-]']
    return finite_difference_check(f, pred, gradient)['max_relative_error [-]']


def check_vertices_3d(rng, n_points=20):
    pred = rng.standard_normal((n_points, 3))
    gt = rng.standard_normal((n_points, 3))
    evaluation = vertices_loss_3d(pred, gt, validate=False, fail_silently=False)
    frozen = evaluation['pred_normalization [-]']

    def f(x):
        return vertices_loss_3d(x, gt, pred_normalization=frozen, validate=False, fail_silently=False)['loss [-]']

    return finite_difference_check(f, pred, evaluation['gradient [-]'])['max_relative_error [-]']


def check_rotation(rng):
    while True:
        r_pred, r_gt = _random_rotation(rng), _random_rotation(rng)
        angle = geodesic_distance(r_pred, r_gt, validate=False, fail_silently=False)['geodesic_distance [rad]']
        if 0.1 < angle < 3.0:
            break

    def f(x):
        return rotation_loss(x, r_gt, validate=False, fail_silently=False)['loss [rad]']

    gradient = rotation_loss(r_pred, r_gt, validate=False, fail_silently=False)['gradient [-]']
    return finite_difference_check(f, r_pred, gradient)['max_relative_error [-]']


def check_focal(rng):
    p = rng.uniform(0.05, 0.95)
    y = int(rng.randint(0, 2))
    alpha_f = rng.uniform(0.1, 0.9)
    gamma = rng.uniform(0.0, 3.0)

    def f(x):
        return focal_loss(float(x[0]), y, alpha_f, gamma, validate=False, fail_silently=False)['loss [-]']

    gradient = focal_loss(p, y, alpha_f, gamma, validate=False, fail_silently=False)['gradient [-]']
    return finite_difference_check(f, [p], [gradient])['max_relative_error [-]']


def check_ciou(rng):
    while True:
        pred, gt = _random_box(rng), _random_box(rng)
        if _separated(pred, gt):
            break
    evaluation = ciou_loss(pred, gt, validate=False, fail_silently=False)
    alpha_v = evaluation['alpha_v [-]']

    def f(x):
        return ciou_loss(BBox(*x), gt, alpha_v=alpha_v, validate=False, fail_silently=False)['loss [-]']

    return finite_difference_check(f, pred.as_array(), evaluation['gradient [-]'])['max_relative_error [-]']


def check_objective(rng, assets, weights=None):
    """
    Finite-difference check of the fitting objective over every entry of the parameter vector. The landmark
    targets are offset from the prediction so that no reprojection residual sits on its kink.
    """
    weights = LossWeights() if weights is None else weights
    params = sample_params(assets, int(rng.randint(2 ** 31 - 1)), coefficient_sigma=1.0, jaw_sigma=0.3,
                           translation=rng.uniform(-5.0, 5.0, 2), scale=rng.uniform(0.5, 2.0))
    prediction = predicted_targets(assets, params)
    while True:
        other = predicted_targets(assets, sample_params(assets, int(rng.randint(2 ** 31 - 1))))
        angle = geodesic_distance(prediction.gt_rotation, other.gt_rotation, validate=False,
                                  fail_silently=False)['geodesic_distance [rad]']
        if 0.1 < angle < 3.0:
            break
    landmarks = prediction.landmarks2d
    targets = FitTargets(landmarks + rng.uniform(0.1, 1.0, landmarks.shape), other.gt_rotation, other.gt_canonical)

    evaluation = objective_and_gradient(assets, params, targets, weights, validate=False, fail_silently=False)
    frozen = evaluation['pred_normalization [-]']
    k_shape, k_expr = assets.k_shape, assets.k_expr

    def f(x):
        return objective_and_gradient(assets, HeadParams.from_vector(x, k_shape, k_expr), targets, weights,
                                      pred_normalization=frozen, validate=False, fail_silently=False)['total [-]']

    return finite_difference_check(f, params.to_vector(), evaluation['gradient [-]'])['max_relative_error [-]']


def run_gradient_checks(seed=0, n_points=100, assets=None):
    """
    Runs the finite-difference suite for every loss and for the fitting objective at ``n_points`` random
    non-singular points each.

    :returns: Ordered dict with the largest relative error per check
    """
    rng = np.random.RandomState(seed)
    if assets is None:
        assets = generate_toy_assets(seed, 162, 4, 2, 16)
    checks = OrderedDict([
        ('reprojection', lambda: check_reprojection(rng)),
        ('vertices_3d', lambda: check_vertices_3d(rng)),
        ('rotation', lambda: check_rotation(rng)),
        ('focal', lambda: check_focal(rng)),
        ('ciou', lambda: check_ciou(rng)),
        ('objective', lambda: check_objective(rng, assets)),
    ])
    results = OrderedDict()
    for name, check in checks.items():
        results[name] = max(check() for _ in range(n_points))
        logger.info("Gradient check %s: max relative error %.3e" % (name, results[name]))
    return results
