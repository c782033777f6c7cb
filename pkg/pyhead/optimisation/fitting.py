#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import logging
from collections import OrderedDict

# 3rd party packages
import numpy as np
from voluptuous import Schema, Required, Optional

# Project imports
from pyhead.general import jsonio
from pyhead.general.validation import Validator, validate_float, validate_integer, validate_boolean
from pyhead.general.exceptions import ValidationError, DivergedError
from pyhead.general.geometry.rotation import (
    rot6d_to_matrix, rot6d_from_matrix, rot6d_vjp, axis_angle_to_matrix, geodesic_distance, check_rotation_matrix)
from pyhead.general.geometry.camera import project
from pyhead.model.assets import ModelAssets, HeadParams, sample_params
from pyhead.model.synthesis import forward_canonical, forward_canonical_vjp, select
from pyhead.optimisation.losses import (
    LossWeights, reprojection_loss, rotation_loss, vertices_loss_3d, total_loss)

logger = logging.getLogger(__name__)

# step multiplier after a trial update that raised the total
BACKTRACK_FACTOR = 0.5


class FitTargets(object):
    """
    Observations a head is fitted to. Only the 2D landmarks are required; the ground truth rotation and the
    subsampled canonical mesh switch on the rotation and 3D vertices terms of the objective.

    :param landmarks2d: Landmark positions, L x 2 [:math:`px`]
    :param gt_rotation: Ground truth global rotation (optional, default= None)
    :param gt_canonical: Ground truth canonical vertices at ``subsample_indices``, k x 3 [:math:`model`] (optional, default= None)
    """

    def __init__(self, landmarks2d, gt_rotation=None, gt_canonical=None):
        self.landmarks2d = self._array('landmarks2d', landmarks2d, 2)
        self.gt_rotation = None if gt_rotation is None else check_rotation_matrix(gt_rotation, 'gt_rotation')
        self.gt_canonical = None if gt_canonical is None else self._array('gt_canonical', gt_canonical, 3)

    @staticmethod
    def _array(name, values, columns):
        array = np.array(values, dtype=float)
        if array.ndim != 2 or array.shape[1] != columns or array.shape[0] == 0:
            raise ValidationError("%s must be a non-empty n x %i array" % (name, columns))
        if not np.all(np.isfinite(array)):
            raise ValidationError("%s contains non-finite entries" % name)
        return array

    def check(self, assets):
        if self.landmarks2d.shape[0] != assets.n_landmarks:
            raise ValidationError("landmarks2d has %i rows, the model has %i landmarks" % (
                self.landmarks2d.shape[0], assets.n_landmarks))
        if self.gt_canonical is not None and self.gt_canonical.shape[0] != assets.subsample_indices.size:
            raise ValidationError("gt_canonical has %i rows, the model subsample has %i vertices" % (
                self.gt_canonical.shape[0], assets.subsample_indices.size))
        return True

    def to_dict(self):
        document = OrderedDict([('landmarks2d', self.landmarks2d)])
        if self.gt_rotation is not None:
            document['gt_rotation'] = self.gt_rotation
        if self.gt_canonical is not None:
            document['gt_canonical'] = self.gt_canonical
        return document

    @classmethod
    def from_dict(cls, document):
        document = jsonio.check(TARGETS_SCHEMA, document, name='fitting targets')
        return cls(**document)


TARGETS_SCHEMA = Schema({
    Required('landmarks2d'): jsonio.matrix(2),
    Optional('gt_rotation'): jsonio.matrix(3),
    Optional('gt_canonical'): jsonio.matrix(3),
})


class FitConfig(object):
    """
    Settings of the gradient descent. The step size is halved every 500 iterations by default. An update that
    would raise the total is retried with half the step, at most ``max_backtracks`` times, so the accepted totals
    never increase.

    Two opt-in variants change the update. ``scale_parameters`` runs the descent in coordinates where each
    parameter is divided by the sensitivity of the objective to it, measured once at the initial parameters.
    ``polyak`` caps the scheduled step by the Polyak step towards the zero lower bound of the objective.

    ``seed``, ``rotation_perturbation`` and ``coefficient_sigma`` describe the perturbed initialisation of
    synthetic problems (see :func:`make_synthetic_problem`).
    """

    def __init__(self, max_iters=2000, step_size=0.05, decay_factor=0.5, decay_every=500, weights=None,
                 convergence_tol=1e-10, convergence_window=20, max_backtracks=60, polyak=False,
                 scale_parameters=False, sensitivity_step=1e-4, seed=0, rotation_perturbation=0.2,
                 coefficient_sigma=0.1):
        validate_integer('max_iters', max_iters, min_value=1)
        validate_float('step_size', step_size, min_value=0.0, min_exclusive=True)
        validate_float('decay_factor', decay_factor, min_value=0.0, max_value=1.0, min_exclusive=True)
        validate_integer('decay_every', decay_every, min_value=1)
        validate_float('convergence_tol', convergence_tol, min_value=0.0)
        validate_integer('convergence_window', convergence_window, min_value=1)
        validate_integer('max_backtracks', max_backtracks, min_value=0)
        validate_boolean('polyak', polyak)
        validate_boolean('scale_parameters', scale_parameters)
        validate_float('sensitivity_step', sensitivity_step, min_value=0.0, min_exclusive=True)
        validate_integer('seed', seed, min_value=0)
        validate_float('rotation_perturbation', rotation_perturbation, min_value=0.0)
        validate_float('coefficient_sigma', coefficient_sigma, min_value=0.0)
        self.max_iters = max_iters
        self.step_size = float(step_size)
        self.decay_factor = float(decay_factor)
        self.decay_every = decay_every
        self.weights = LossWeights() if weights is None else weights
        self.convergence_tol = float(convergence_tol)
        self.convergence_window = convergence_window
        self.max_backtracks = max_backtracks
        self.polyak = polyak
        self.scale_parameters = scale_parameters
        self.sensitivity_step = float(sensitivity_step)
        self.seed = seed
        self.rotation_perturbation = float(rotation_perturbation)
        self.coefficient_sigma = float(coefficient_sigma)

    def scheduled_step(self, iteration):
        return self.step_size * self.decay_factor ** (iteration // self.decay_every)

    def is_decay_iteration(self, iteration):
        return iteration > 0 and iteration % self.decay_every == 0

    def to_dict(self):
        return OrderedDict([
            ('max_iters', self.max_iters),
            ('step_size', self.step_size),
            ('decay_factor', self.decay_factor),
            ('decay_every', self.decay_every),
            ('weights', self.weights.to_dict()),
            ('convergence_tol', self.convergence_tol),
            ('convergence_window', self.convergence_window),
            ('max_backtracks', self.max_backtracks),
            ('polyak', self.polyak),
            ('scale_parameters', self.scale_parameters),
            ('sensitivity_step', self.sensitivity_step),
            ('seed', self.seed),
            ('rotation_perturbation', self.rotation_perturbation),
            ('coefficient_sigma', self.coefficient_sigma),
        ])

    @classmethod
    def from_dict(cls, document):
        document = dict(document)
        if 'weights' in document:
            document['weights'] = LossWeights.from_dict(document['weights'])
        return cls(**document)


class FitTrace(object):
    """
    Record of a fit: the loss breakdown of every iterate (the initial parameters included), the accepted step
    size and the number of step halvings of every update, the final parameters and the convergence status.

    Update ``i`` turns iterate ``i`` into iterate ``i + 1``. It is a decay event when the schedule lowered the
    step at ``i`` or when the step was halved after a rejected trial.
    """

    def __init__(self, breakdowns, params, iterations, converged, step_sizes, backtracks, decay_iterations):
        self.breakdowns = breakdowns
        self.params = params
        self.iterations = iterations
        self.converged = converged
        self.step_sizes = step_sizes
        self.backtracks = backtracks
        self.decay_iterations = decay_iterations

    @property
    def totals(self):
        return np.array([breakdown.total for breakdown in self.breakdowns])

    @property
    def final(self):
        return self.breakdowns[-1]

    def to_dict(self):
        return OrderedDict([
            ('params', self.params.to_dict() if self.params is not None else None),
            ('iterations', self.iterations),
            ('converged', self.converged),
            ('final', self.final.to_dict() if self.breakdowns else None),
            ('totals', [breakdown.total for breakdown in self.breakdowns]),
            ('step_sizes', list(self.step_sizes)),
            ('backtracks', list(self.backtracks)),
            ('decay_iterations', list(self.decay_iterations)),
        ])

    def __repr__(self):
        return "FitTrace(iterations=%i, converged=%r, total=%r)" % (
            self.iterations, self.converged, self.final.total if self.breakdowns else None)


OBJECTIVE_AND_GRADIENT = {
    'assets': {'type': 'instance', 'class': ModelAssets},
    'params': {'type': 'instance', 'class': HeadParams},
    'targets': {'type': 'instance', 'class': FitTargets},
    'weights': {'type': 'instance', 'class': LossWeights},
}

OBJECTIVE_AND_GRADIENT_ERRORRETURN = {
    'breakdown [-]': None,
    'total [-]': np.nan,
    'gradient [-]': None,
    'pred_normalization [-]': None,
}


@Validator(OBJECTIVE_AND_GRADIENT, OBJECTIVE_AND_GRADIENT_ERRORRETURN)
def objective_and_gradient(assets, params, targets, weights=LossWeights(), pred_normalization=None):
    """
    Fitting objective and its gradient over the flat parameter vector. The objective combines the reprojection
    loss on the projected landmarks, the rotation loss when a ground truth rotation is given and the 3D vertices
    loss on the subsampled canonical mesh when a ground truth mesh is given. Absent targets contribute exactly
    zero to the value and to the gradient. There are no anchors, so the classification and box terms are zero.

    The gradient is backpropagated analytically through the projection, the 6D Gram-Schmidt map, the jaw
    Rodrigues formula and the blendshapes. The reprojection subgradient is zero for zero residuals and the unit
    cube normalisation of the prediction is a constant (pass ``pred_normalization`` to freeze it).

    :param assets: Head model (:class:`ModelAssets`)
    :param params: Current parameters (:class:`HeadParams`)
    :param targets: Observations (:class:`FitTargets`)
    :param weights: Loss weights (:class:`LossWeights`) (optional, default= (50, 1, 1, 0.5, 2.5))
    :param pred_normalization: Frozen (scale, center) of the predicted mesh (optional, default= None)

    .. math::
        L = \\alpha_{3D} L_{3D} + \\alpha_R L_R + \\alpha_{reproj} L_{reproj}

    :returns: Dictionary with the following keys:

        - 'breakdown [-]': :class:`LossBreakdown`
        - 'total [-]': Weighted total
        - 'gradient [-]': Gradient in the layout of :meth:`HeadParams.to_vector`
        - 'pred_normalization [-]': Normalisation used for the predicted mesh, None without 3D target

    """
    targets.check(assets)
    canonical = forward_canonical(assets, params, validate=False, fail_silently=False)
    vertices = canonical['vertices [model]']
    rotation = rot6d_to_matrix(params.rot6d, validate=False, fail_silently=False)['rotation_matrix [-]']
    projected = project(vertices, rotation, params.scale, params.translation, validate=False, fail_silently=False)

    # reprojection on the landmarks of the full projected mesh
    landmark_vertices = select(assets.landmark_indices, vertices)
    camera_landmarks = select(assets.landmark_indices, projected['camera_vertices [model]'])
    reprojection = reprojection_loss(select(assets.landmark_indices, projected['points2d [px]']),
                                     targets.landmarks2d, validate=False, fail_silently=False)
    g_points = weights.w_reproj * reprojection['gradient [-]']
    g_translation = g_points.sum(axis=0)
    g_scale = np.sum(g_points[:, 0] * camera_landmarks[:, 0] - g_points[:, 1] * camera_landmarks[:, 1])
    g_camera = np.column_stack((params.scale * g_points[:, 0], -params.scale * g_points[:, 1],
                                np.zeros(g_points.shape[0])))
    g_rotation = g_camera.T @ landmark_vertices
    g_vertices = np.zeros_like(vertices)
    np.add.at(g_vertices, assets.landmark_indices, g_camera @ rotation)

    l_rot = 0.0
    if targets.gt_rotation is not None:
        l_rot = geodesic_distance(rotation, targets.gt_rotation, validate=False,
                                  fail_silently=False)['geodesic_distance [rad]']
        g_rotation = g_rotation + weights.w_rot * rotation_loss(
            rotation, targets.gt_rotation, validate=False, fail_silently=False)['gradient [-]']

    l_3d = 0.0
    if targets.gt_canonical is not None:
        loss_3d = vertices_loss_3d(select(assets.subsample_indices, vertices), targets.gt_canonical,
                                   pred_normalization=pred_normalization, validate=False, fail_silently=False)
        l_3d = loss_3d['loss [-]']
        pred_normalization = loss_3d['pred_normalization [-]']
        np.add.at(g_vertices, assets.subsample_indices, weights.w_3d * loss_3d['gradient [-]'])
    else:
        pred_normalization = None

    g_canonical = forward_canonical_vjp(assets, params, g_vertices)
    gradient = np.concatenate((g_canonical['shape'], g_canonical['expression'], g_canonical['jaw'],
                               rot6d_vjp(params.rot6d, g_rotation), g_translation, [g_scale]))

    combined = total_loss(l_3d, l_rot, reprojection['loss [px]'], 0.0, 0.0, weights=weights,
                          validate=False, fail_silently=False)
    return {
        'breakdown [-]': combined['breakdown [-]'],
        'total [-]': combined['total [-]'],
        'gradient [-]': gradient,
        'pred_normalization [-]': pred_normalization,
    }


def predicted_targets(assets, params, like=None):
    """
    Targets reproduced exactly by ``params``. With ``like``, only the target kinds present in ``like`` are filled.
    """
    canonical = forward_canonical(assets, params, validate=False, fail_silently=False)['vertices [model]']
    rotation = rot6d_to_matrix(params.rot6d, validate=False, fail_silently=False)['rotation_matrix [-]']
    points2d = project(canonical, rotation, params.scale, params.translation,
                       validate=False, fail_silently=False)['points2d [px]']
    with_rotation = like is None or like.gt_rotation is not None
    with_canonical = like is None or like.gt_canonical is not None
    return FitTargets(landmarks2d=select(assets.landmark_indices, points2d),
                      gt_rotation=rotation if with_rotation else None,
                      gt_canonical=select(assets.subsample_indices, canonical) if with_canonical else None)


def parameter_sensitivity(assets, params, targets, weights, step=1e-4):
    """
    Change of the weighted objective per unit change of each parameter, measured against the current
    prediction. Parameters without influence get a sensitivity of 1.
    """
    reference = predicted_targets(assets, params, like=targets)
    vector = params.to_vector()
    k_shape, k_expr = params.shape.size, params.expression.size
    sensitivity = np.zeros(vector.size)
    for i in range(vector.size):
        perturbed = vector.copy()
        perturbed[i] += step
        candidate = HeadParams.from_vector(perturbed, k_shape, k_expr)
        total = objective_and_gradient(assets, candidate, reference, weights,
                                       validate=False, fail_silently=False)['total [-]']
        sensitivity[i] = total / step
    floor = 1e-6 * sensitivity.max() if sensitivity.size else 0.0
    return np.where((sensitivity > floor) & (sensitivity > 0.0), sensitivity, 1.0)


FIT = {
    'assets': {'type': 'instance', 'class': ModelAssets},
    'targets': {'type': 'instance', 'class': FitTargets},
    'init': {'type': 'instance', 'class': HeadParams},
    'config': {'type': 'instance', 'class': FitConfig},
}

FIT_ERRORRETURN = {
    'trace [-]': None,
    'params [-]': None,
    'converged [-]': None,
}


@Validator(FIT, FIT_ERRORRETURN)
def fit(assets, targets, init, config=FitConfig()):
    """
    Recovers head parameters from the targets with plain gradient descent on the flat parameter vector:

    .. math::
        x_{i+1} = x_i - \\eta_i \\, g(x_i), \\quad \\eta_i = \\eta_0 \\cdot 0.5^{\\lfloor i / 500 \\rfloor}

    A trial update that raises the total is rejected and retried with half the step until the total does not
    increase. Each halving is recorded as a decay event of that update. When ``max_backtracks`` halvings do not
    give a non-increasing total, the fit stops without converging.

    With ``config.scale_parameters`` the update becomes :math:`x_{i+1} = x_i - \\eta_i g / s^2` with :math:`s` the
    sensitivity of the objective to each parameter. With ``config.polyak`` the step is capped by
    :math:`L(x_i) / \\| g / s \\|^2`.

    The fit stops when the total is exactly zero, when it changed less than ``convergence_tol`` over the last
    ``convergence_window`` iterations, when the gradient vanishes or after ``max_iters`` updates. The final
    iterate is returned and the result is a pure function of the inputs.

    :param assets: Head model (:class:`ModelAssets`)
    :param targets: Observations (:class:`FitTargets`)
    :param init: Initial parameters (:class:`HeadParams`)
    :param config: Descent settings (:class:`FitConfig`) (optional)

    :returns: Dictionary with the following keys:

        - 'trace [-]': :class:`FitTrace`
        - 'params [-]': Parameters of the final iterate
        - 'converged [-]': True when a convergence criterion was met

    :raises DivergedError: when the total becomes non-finite or an update leaves the parameter domain, the partial
        trace is attached
    """
    init.check_against(assets)
    targets.check(assets)
    weights = config.weights
    k_shape, k_expr = init.shape.size, init.expression.size
    x = init.to_vector()

    if config.scale_parameters:
        sensitivity = parameter_sensitivity(assets, init, targets, weights, config.sensitivity_step)
    else:
        sensitivity = np.ones(x.size)

    logger.info("Fitting %i parameters to %i landmarks (rotation target: %s, mesh target: %s)" % (
        x.size, targets.landmarks2d.shape[0], targets.gt_rotation is not None, targets.gt_canonical is not None))

    def partial_trace(iteration):
        return FitTrace(breakdowns, HeadParams.from_vector(x, k_shape, k_expr), iteration, False,
                        step_sizes, backtracks, decay_iterations)

    def diverged(message, iteration):
        raise DivergedError(message, trace=partial_trace(iteration))

    breakdowns = []
    step_sizes = []
    backtracks = []
    decay_iterations = []
    converged = False
    iteration = 0
    evaluation = objective_and_gradient(assets, HeadParams.from_vector(x, k_shape, k_expr), targets, weights,
                                        validate=False, fail_silently=False)
    while True:
        total = evaluation['total [-]']
        breakdowns.append(evaluation['breakdown [-]'])
        if not np.isfinite(total):
            diverged("Total loss became %s at iteration %i" % (str(total), iteration), iteration)
        if iteration % 100 == 0:
            logger.debug("Iteration %i, total loss %.6e" % (iteration, total))

        gradient = evaluation['gradient [-]']
        scaled_gradient = gradient / sensitivity
        norm2 = np.dot(scaled_gradient, scaled_gradient)
        if total == 0.0 or norm2 == 0.0:
            converged = True
            break
        window = config.convergence_window
        if iteration >= window and abs(breakdowns[iteration - window].total - total) < config.convergence_tol:
            converged = True
            break
        if iteration >= config.max_iters:
            break

        step = config.scheduled_step(iteration)
        if config.polyak:
            step = min(step, total / norm2)
        direction = scaled_gradient / sensitivity
        for halvings in range(config.max_backtracks + 1):
            trial = x - step * direction
            if np.all(np.isfinite(trial)) and trial[-1] > 0.0:
                trial_evaluation = objective_and_gradient(assets, HeadParams.from_vector(trial, k_shape, k_expr),
                                                          targets, weights, validate=False, fail_silently=False)
                if not np.isfinite(trial_evaluation['total [-]']):
                    breakdowns.append(trial_evaluation['breakdown [-]'])
                    diverged("Total loss became %s at iteration %i" % (
                        str(trial_evaluation['total [-]']), iteration + 1), iteration + 1)
                if trial_evaluation['total [-]'] <= total:
                    break
            elif halvings == config.max_backtracks:
                diverged("Update %i left the parameter domain (scale %s)" % (iteration + 1, str(trial[-1])),
                         iteration)
            step *= BACKTRACK_FACTOR
        else:
            logger.warning("No step of at most %.3e reduces the total loss %.6e at iteration %i" % (
                config.scheduled_step(iteration), total, iteration))
            break

        if halvings > 0 or config.is_decay_iteration(iteration):
            decay_iterations.append(iteration)
        step_sizes.append(step)
        backtracks.append(halvings)
        x = trial
        evaluation = trial_evaluation
        iteration += 1

    if converged:
        logger.info("Fit converged after %i iterations, total loss %.6e" % (iteration, breakdowns[-1].total))
    else:
        logger.warning("Fit stopped after %i iterations without converging, total loss %.6e" % (
            iteration, breakdowns[-1].total))

    final = HeadParams.from_vector(x, k_shape, k_expr)
    trace = FitTrace(breakdowns, final, iteration, converged, step_sizes, backtracks, decay_iterations)
    return {
        'trace [-]': trace,
        'params [-]': final,
        'converged [-]': converged,
    }


def initial_params(assets, targets):
    """
    Neutral starting point for fitting real targets: zero coefficients, the ground truth rotation when known
    (identity otherwise), translation at the landmark centroid and scale from the landmark spread.
    """
    targets.check(assets)
    rotation = np.eye(3) if targets.gt_rotation is None else targets.gt_rotation
    template = select(assets.landmark_indices, assets.template) @ rotation.T
    observed = targets.landmarks2d
    centre = observed.mean(axis=0)
    template_spread = np.sqrt(np.mean(np.sum((template[:, :2] - template[:, :2].mean(axis=0)) ** 2, axis=1)))
    observed_spread = np.sqrt(np.mean(np.sum((observed - centre) ** 2, axis=1)))
    scale = observed_spread / template_spread if template_spread > 0.0 and observed_spread > 0.0 else 1.0
    translation = centre - scale * np.array([template[:, 0].mean(), -template[:, 1].mean()])
    return HeadParams(np.zeros(assets.k_shape), np.zeros(assets.k_expr), np.zeros(3),
                      rot6d_from_matrix(rotation), translation, scale)


def make_synthetic_problem(assets, seed, rotation_perturbation=0.2, coefficient_sigma=0.1,
                           with_rotation=True, with_canonical=True):
    """
    Synthetic recovery problem with noiseless targets generated from known parameters. The initialisation
    composes the true rotation with a rotation of ``rotation_perturbation`` radians about a random axis and adds
    :math:`N(0, \\sigma)` noise to the shape, expression and jaw coefficients. Translation and scale start at
    their true values.

    :returns: Dictionary with the keys 'truth [-]', 'targets [-]' and 'init [-]'
    """
    truth = sample_params(assets, seed)
    targets = predicted_targets(assets, truth)
    if not with_rotation:
        targets.gt_rotation = None
    if not with_canonical:
        targets.gt_canonical = None

    rng = np.random.RandomState([seed, 1])
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    perturbation = axis_angle_to_matrix(rotation_perturbation * axis, validate=False,
                                        fail_silently=False)['rotation_matrix [-]']
    rotation = rot6d_to_matrix(truth.rot6d, validate=False, fail_silently=False)['rotation_matrix [-]']
    init = HeadParams(shape=truth.shape + coefficient_sigma * rng.standard_normal(truth.shape.size),
                      expression=truth.expression + coefficient_sigma * rng.standard_normal(truth.expression.size),
                      jaw=truth.jaw + coefficient_sigma * rng.standard_normal(3),
                      rot6d=rot6d_from_matrix(rotation @ perturbation),
                      translation=truth.translation, scale=truth.scale)
    return {
        'truth [-]': truth,
        'targets [-]': targets,
        'init [-]': init,
    }
