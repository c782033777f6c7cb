#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import math
from collections import OrderedDict

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general.validation import Validator, validate_float
from pyhead.general.exceptions import ValidationError, DegenerateGeometryError
from pyhead.general.geometry.boxes import BBox

LOSS_TERMS = ('3d', 'rot', 'reproj', 'cls', 'reg')


class LossWeights(object):
    """
    Weights of the five loss components. The defaults bind the published weights to the terms in the order
    in which the final loss lists them: 3D vertices, rotation, reprojection, classification and box regression.

    :param w_3d: Weight of the 3D vertices loss [:math:`-`] (optional, default= 50.0)
    :param w_rot: Weight of the rotation loss [:math:`-`] (optional, default= 1.0)
    :param w_reproj: Weight of the reprojection loss [:math:`-`] (optional, default= 1.0)
    :param w_cls: Weight of the classification (focal) loss [:math:`-`] (optional, default= 0.5)
    :param w_reg: Weight of the box regression (CIoU) loss [:math:`-`] (optional, default= 2.5)
    """

    def __init__(self, w_3d=50.0, w_rot=1.0, w_reproj=1.0, w_cls=0.5, w_reg=2.5):
        for name, value in zip(LOSS_TERMS, (w_3d, w_rot, w_reproj, w_cls, w_reg)):
            validate_float('w_%s' % name, value, min_value=0.0)
            if not math.isfinite(value):
                raise ValidationError("w_%s must be finite" % name)
        self.w_3d = float(w_3d)
        self.w_rot = float(w_rot)
        self.w_reproj = float(w_reproj)
        self.w_cls = float(w_cls)
        self.w_reg = float(w_reg)

    def as_tuple(self):
        return self.w_3d, self.w_rot, self.w_reproj, self.w_cls, self.w_reg

    def to_dict(self):
        return OrderedDict(('w_%s' % name, value) for name, value in zip(LOSS_TERMS, self.as_tuple()))

    @classmethod
    def from_dict(cls, document):
        return cls(**document)

    def ablated(self, term):
        """
        Copy of the weights with the weight of one term (e.g. ``'rot'``) set to zero
        """
        if term not in LOSS_TERMS:
            raise ValidationError("Unknown loss term %s, choose from %s" % (term, str(LOSS_TERMS)))
        weights = self.to_dict()
        weights['w_%s' % term] = 0.0
        return LossWeights(**weights)

    def __repr__(self):
        return "LossWeights(%s)" % ", ".join("%s=%r" % item for item in self.to_dict().items())


class LossBreakdown(object):
    """
    Values of the five loss components and their weighted total
    """

    def __init__(self, l_3d, l_rot, l_reproj, l_cls, l_reg, total):
        self.l_3d = l_3d
        self.l_rot = l_rot
        self.l_reproj = l_reproj
        self.l_cls = l_cls
        self.l_reg = l_reg
        self.total = total

    def components(self):
        return self.l_3d, self.l_rot, self.l_reproj, self.l_cls, self.l_reg

    def to_dict(self):
        return OrderedDict([
            ('l_3d', self.l_3d),
            ('l_rot', self.l_rot),
            ('l_reproj', self.l_reproj),
            ('l_cls', self.l_cls),
            ('l_reg', self.l_reg),
            ('total', self.total),
        ])

    def __repr__(self):
        return "LossBreakdown(%s)" % ", ".join("%s=%r" % item for item in self.to_dict().items())


REPROJECTION_LOSS = {
    'pred2d': {'type': 'array', 'shape': (None, 2)},
    'gt2d': {'type': 'array', 'shape': (None, 2)},
}

REPROJECTION_LOSS_ERRORRETURN = {
    'loss [px]': np.nan,
    'gradient [-]': None,
}


@Validator(REPROJECTION_LOSS, REPROJECTION_LOSS_ERRORRETURN)
def reprojection_loss(pred2d, gt2d):
    """
    Mean absolute difference between reprojected vertices and ground truth 2D keypoints, summed over both
    coordinates of every point. At a zero residual the subgradient 0 is used.

    :param pred2d: Reprojected vertices, N x 2 (:math:`v_p`) [:math:`px`]
    :param gt2d: Ground truth keypoints, N x 2 (:math:`v_{gt}`) [:math:`px`]

    .. math::
        L_{reproj} = \\frac{1}{N} \\sum_i \\left( |\\Delta x_i| + |\\Delta y_i| \\right)

        \\frac{\\partial L_{reproj}}{\\partial v_p} = \\frac{\\text{sign}(\\Delta)}{N}

    :returns: Dictionary with the following keys:

        - 'loss [px]': Loss value
        - 'gradient [-]': Gradient with respect to ``pred2d``, N x 2

    """
    pred2d = np.asarray(pred2d, dtype=float)
    gt2d = np.asarray(gt2d, dtype=float)
    if pred2d.shape != gt2d.shape or pred2d.shape[0] == 0:
        raise ValidationError("pred2d %s and gt2d %s must have equal, non-empty shapes" % (
            str(pred2d.shape), str(gt2d.shape)))
    n = pred2d.shape[0]
    delta = pred2d - gt2d
    return {
        'loss [px]': np.abs(delta).sum() / n,
        'gradient [-]': np.sign(delta) / n,
    }


NORMALIZE_UNIT_CUBE = {
    'vertices': {'type': 'array', 'shape': (None, 3)},
}

NORMALIZE_UNIT_CUBE_ERRORRETURN = {
    'vertices [-]': None,
    'scale [model]': np.nan,
    'center [model]': None,
}


@Validator(NORMALIZE_UNIT_CUBE, NORMALIZE_UNIT_CUBE_ERRORRETURN)
def normalize_unit_cube(vertices):
    """
    Uniform rescaling and recentring of a point set so that its bounding box fits the unit cube. The longest
    edge of the bounding box becomes 1 and the box centre moves to the cube centre, so aspect ratios are
    preserved.

    :param vertices: Point set, n x 3 with n >= 2 [:math:`model`]

    .. math::
        s = \\max_a (\\max_i v_{i,a} - \\min_i v_{i,a})

        v' = \\frac{v - c}{s} + (0.5, 0.5, 0.5)

    :returns: Dictionary with the following keys:

        - 'vertices [-]': Normalised points
        - 'scale [model]': Longest bounding box edge :math:`s`
        - 'center [model]': Bounding box centre :math:`c`

    :raises DegenerateGeometryError: for point sets without extent
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape[0] < 2:
        raise DegenerateGeometryError("At least two vertices are needed for unit cube normalisation")
    lower = vertices.min(axis=0)
    upper = vertices.max(axis=0)
    scale = (upper - lower).max()
    if not scale > 0.0:
        raise DegenerateGeometryError("Vertices have zero extent")
    center = 0.5 * (lower + upper)
    return {
        'vertices [-]': (vertices - center) / scale + 0.5,
        'scale [model]': scale,
        'center [model]': center,
    }


def _apply_normalization(vertices, normalization):
    scale, center = normalization
    return (np.asarray(vertices, dtype=float) - np.asarray(center, dtype=float)) / scale + 0.5


VERTICES_LOSS_3D = {
    'pred_canonical': {'type': 'array', 'shape': (None, 3)},
    'gt_canonical': {'type': 'array', 'shape': (None, 3)},
}

VERTICES_LOSS_3D_ERRORRETURN = {
    'loss [-]': np.nan,
    'gradient [-]': None,
    'pred_normalization [-]': None,
}


@Validator(VERTICES_LOSS_3D, VERTICES_LOSS_3D_ERRORRETURN)
def vertices_loss_3d(pred_canonical, gt_canonical, pred_normalization=None):
    """
    L2 loss over the normalised and unrotated head vertices. Both subsampled canonical meshes pass through
    :func:`normalize_unit_cube` and the loss is the mean Euclidean distance of corresponding vertices. The
    loss is therefore invariant to uniform scaling and translation of either mesh.

    The normalisation scale and centre of the prediction are constants for the gradient (stop-gradient).
    Passing ``pred_normalization=(scale, center)`` freezes them explicitly, which is how the gradient is
    checked with finite differences.

    :param pred_canonical: Predicted canonical vertices with zero global rotation, k x 3 [:math:`model`]
    :param gt_canonical: Ground truth canonical vertices, k x 3 [:math:`model`]
    :param pred_normalization: Frozen (scale, center) of the prediction (optional, default= None)

    .. math::
        L_{3D} = \\frac{1}{k} \\sum_i \\| v'_{p,i} - v'_{gt,i} \\|_2

        \\frac{\\partial L_{3D}}{\\partial v_{p,i}} = \\frac{1}{k s_p} \\frac{v'_{p,i} - v'_{gt,i}}{\\| v'_{p,i} - v'_{gt,i} \\|_2}

    :returns: Dictionary with the following keys:

        - 'loss [-]': Loss value
        - 'gradient [-]': Gradient with respect to ``pred_canonical``, k x 3 (0 for coinciding points)
        - 'pred_normalization [-]': The (scale, center) used for the prediction

    """
    pred = np.asarray(pred_canonical, dtype=float)
    gt = np.asarray(gt_canonical, dtype=float)
    if pred.shape != gt.shape:
        raise ValidationError("pred_canonical %s and gt_canonical %s must have equal shapes" % (
            str(pred.shape), str(gt.shape)))
    if pred_normalization is None:
        normalized = normalize_unit_cube(pred, validate=False, fail_silently=False)
        pred_normalization = (normalized['scale [model]'], normalized['center [model]'])
        pred_n = normalized['vertices [-]']
    else:
        pred_n = _apply_normalization(pred, pred_normalization)
    gt_n = normalize_unit_cube(gt, validate=False, fail_silently=False)['vertices [-]']

    k = pred.shape[0]
    delta = pred_n - gt_n
    distance = np.sqrt((delta ** 2).sum(axis=1))
    safe = np.where(distance > 0.0, distance, 1.0)
    gradient = np.where(distance[:, None] > 0.0, delta / safe[:, None], 0.0) / (k * pred_normalization[0])
    return {
        'loss [-]': distance.sum() / k,
        'gradient [-]': gradient,
        'pred_normalization [-]': pred_normalization,
    }


ROTATION_LOSS = {
    'r_pred': {'type': 'array', 'shape': (3, 3)},
    'r_gt': {'type': 'array', 'shape': (3, 3)},
    'singularity_guard': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0},
}

ROTATION_LOSS_ERRORRETURN = {
    'loss [rad]': np.nan,
    'gradient [-]': None,
}


@Validator(ROTATION_LOSS, ROTATION_LOSS_ERRORRETURN)
def rotation_loss(r_pred, r_gt, singularity_guard=1e-9):
    """
    Geodesic distance between the estimated and ground truth rotation matrices. The trace argument is
    clamped to [-1, 1] before the arccosine; for the gradient it is clamped to
    :math:`|c| \\leq 1 - 10^{-9}` so the derivative stays finite at coinciding rotations.

    :param r_pred: Estimated rotation (:math:`R_p`) [:math:`-`]
    :param r_gt: Ground truth rotation (:math:`R_{gt}`) [:math:`-`]
    :param singularity_guard: Distance of the gradient clamp from :math:`\\pm 1` [:math:`-`] (optional, default= 1e-9)

    .. math::
        c = \\frac{\\text{tr}(R_p R_{gt}^T) - 1}{2}

        L_R = \\cos^{-1}(c)

        \\frac{\\partial L_R}{\\partial R_p} = - \\frac{1}{2 \\sqrt{1 - c^2}} R_{gt}

    :returns: Dictionary with the following keys:

        - 'loss [rad]': Loss value in :math:`[0, \\pi]`
        - 'gradient [-]': Gradient with respect to the nine entries of :math:`R_p`

    """
    r_pred = np.asarray(r_pred, dtype=float)
    r_gt = np.asarray(r_gt, dtype=float)
    c = 0.5 * (np.sum(r_pred * r_gt) - 1.0)
    value = np.arccos(min(1.0, max(-1.0, c)))
    c_guarded = min(1.0 - singularity_guard, max(-1.0 + singularity_guard, c))
    return {
        'loss [rad]': value,
        'gradient [-]': -0.5 / np.sqrt(1.0 - c_guarded ** 2) * r_gt,
    }


FOCAL_LOSS = {
    'p': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0},
    'y': {'type': 'int', 'min_value': 0, 'max_value': 1},
    'alpha_f': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0},
    'gamma': {'type': 'float', 'min_value': 0.0, 'max_value': None},
}

FOCAL_LOSS_ERRORRETURN = {
    'loss [-]': np.nan,
    'gradient [-]': np.nan,
}


@Validator(FOCAL_LOSS, FOCAL_LOSS_ERRORRETURN)
def focal_loss(p, y, alpha_f=0.25, gamma=2.0, eps=1e-7):
    """
    Focal loss for binary classification. Cross-entropy is reweighted by :math:`(1-p_t)^\\gamma` so that hard,
    misclassified examples dominate. The probability is clamped to :math:`[\\epsilon, 1 - \\epsilon]`; outside
    that range the gradient is zero.

    :param p: Predicted probability of the positive class [:math:`-`] - Suggested range: 0.0 <= p <= 1.0
    :param y: Binary label [:math:`-`] - Options: 0, 1
    :param alpha_f: Class balance weight (:math:`\\alpha`) [:math:`-`] (optional, default= 0.25)
    :param gamma: Focusing parameter (:math:`\\gamma`) [:math:`-`] (optional, default= 2.0)
    :param eps: Clamp distance (:math:`\\epsilon`) [:math:`-`] (optional, default= 1e-7)

    .. math::
        L = -\\alpha (1 - p)^\\gamma \\ln p \\quad (y = 1)

        L = -(1 - \\alpha) p^\\gamma \\ln (1 - p) \\quad (y = 0)

    :returns: Dictionary with the following keys:

        - 'loss [-]': Loss value
        - 'gradient [-]': Derivative with respect to :math:`p`

    Reference - Lin, T.-Y., Goyal, P., Girshick, R., He, K., Dollar, P. (2017). Focal loss for dense object
    detection. ICCV.

    """
    clamped = min(1.0 - eps, max(eps, float(p)))
    inside = eps <= p <= 1.0 - eps
    if y == 1:
        q = 1.0 - clamped
        value = -alpha_f * q ** gamma * math.log(clamped)
        gradient = alpha_f * (gamma * q ** (gamma - 1.0) * math.log(clamped) - q ** gamma / clamped) \
            if gamma > 0.0 else -alpha_f / clamped
    else:
        q = 1.0 - clamped
        value = -(1.0 - alpha_f) * clamped ** gamma * math.log(q)
        gradient = -(1.0 - alpha_f) * (gamma * clamped ** (gamma - 1.0) * math.log(q) - clamped ** gamma / q) \
            if gamma > 0.0 else (1.0 - alpha_f) / q
    return {
        'loss [-]': value,
        'gradient [-]': gradient if inside else 0.0,
    }


CIOU_LOSS = {
    'pred': {'type': 'instance', 'class': BBox},
    'gt': {'type': 'instance', 'class': BBox},
}

CIOU_LOSS_ERRORRETURN = {
    'loss [-]': np.nan,
    'gradient [-]': None,
    'iou [-]': np.nan,
    'alpha_v [-]': np.nan,
}


@Validator(CIOU_LOSS, CIOU_LOSS_ERRORRETURN)
def ciou_loss(pred, gt, alpha_v=None):
    """
    Complete IoU loss for box regression, combining overlap, normalised centre distance and aspect ratio
    consistency. Following the usual convention the trade-off weight :math:`\\alpha_v` is a constant for the
    gradient; ``alpha_v`` freezes it explicitly.

    :param pred: Predicted box with positive area
    :param gt: Ground truth box with positive area
    :param alpha_v: Frozen trade-off weight (optional, default= None)

    .. math::
        L_{CIoU} = 1 - IoU + \\frac{\\rho^2(c_p, c_{gt})}{d^2} + \\alpha_v v

        v = \\frac{4}{\\pi^2} \\left( \\tan^{-1} \\frac{w_{gt}}{h_{gt}} - \\tan^{-1} \\frac{w_p}{h_p} \\right)^2

        \\alpha_v = \\frac{v}{(1 - IoU) + v}

    :returns: Dictionary with the following keys:

        - 'loss [-]': Loss value, 0 for identical boxes and above 1 for disjoint boxes
        - 'gradient [-]': Gradient with respect to (x1, y1, x2, y2) of the prediction
        - 'iou [-]': IoU of the boxes
        - 'alpha_v [-]': Trade-off weight used

    Reference - Zheng, Z., Wang, P., Ren, D., Liu, W., Ye, R., Hu, Q., Zuo, W. (2021). Enhancing geometric
    factors in model learning and inference for object detection and instance segmentation. IEEE TCYB.

    """
    if pred.is_degenerate or gt.is_degenerate:
        raise ValidationError("CIoU requires boxes with positive area")
    x1, y1, x2, y2 = pred.as_list()
    gx1, gy1, gx2, gy2 = gt.as_list()
    w, h = x2 - x1, y2 - y1
    gw, gh = gx2 - gx1, gy2 - gy1

    # overlap
    iw = min(x2, gx2) - max(x1, gx1)
    ih = min(y2, gy2) - max(y1, gy1)
    overlapping = iw > 0.0 and ih > 0.0
    intersection = iw * ih if overlapping else 0.0
    union = w * h + gw * gh - intersection
    iou_value = intersection / union

    if overlapping:
        d_intersection = np.array([
            -ih if x1 > gx1 else 0.0,
            -iw if y1 > gy1 else 0.0,
            ih if x2 < gx2 else 0.0,
            iw if y2 < gy2 else 0.0])
    else:
        d_intersection = np.zeros(4)
    d_area = np.array([-h, -w, h, w])
    d_union = d_area - d_intersection
    d_iou = (d_intersection * union - intersection * d_union) / union ** 2

    # centre distance over the diagonal of the enclosing box
    dx = 0.5 * (x1 + x2) - 0.5 * (gx1 + gx2)
    dy = 0.5 * (y1 + y2) - 0.5 * (gy1 + gy2)
    rho2 = dx * dx + dy * dy
    ex = max(x2, gx2) - min(x1, gx1)
    ey = max(y2, gy2) - min(y1, gy1)
    diag2 = ex * ex + ey * ey
    d_rho2 = np.array([dx, dy, dx, dy])
    d_diag2 = 2.0 * np.array([
        -ex if x1 <= gx1 else 0.0,
        -ey if y1 <= gy1 else 0.0,
        ex if x2 >= gx2 else 0.0,
        ey if y2 >= gy2 else 0.0])
    d_distance = (d_rho2 * diag2 - rho2 * d_diag2) / diag2 ** 2

    # aspect ratio consistency
    factor = 4.0 / np.pi ** 2
    angle_difference = math.atan(gw / gh) - math.atan(w / h)
    v = factor * angle_difference ** 2
    if alpha_v is None:
        alpha_v = v / ((1.0 - iou_value) + v) if v > 0.0 else 0.0
    d_v_d_angle = -2.0 * factor * angle_difference
    norm2 = w * w + h * h
    d_v = d_v_d_angle * np.array([-h / norm2, w / norm2, h / norm2, -w / norm2])

    return {
        'loss [-]': 1.0 - iou_value + rho2 / diag2 + alpha_v * v,
        'gradient [-]': -d_iou + d_distance + alpha_v * d_v,
        'iou [-]': iou_value,
        'alpha_v [-]': alpha_v,
    }


TOTAL_LOSS = {
    'l_3d': {'type': 'float', 'min_value': None, 'max_value': None},
    'l_rot': {'type': 'float', 'min_value': None, 'max_value': None},
    'l_reproj': {'type': 'float', 'min_value': None, 'max_value': None},
    'l_cls': {'type': 'float', 'min_value': None, 'max_value': None},
    'l_reg': {'type': 'float', 'min_value': None, 'max_value': None},
    'weights': {'type': 'instance', 'class': LossWeights},
}

TOTAL_LOSS_ERRORRETURN = {
    'total [-]': np.nan,
    'breakdown [-]': None,
}


@Validator(TOTAL_LOSS, TOTAL_LOSS_ERRORRETURN)
def total_loss(l_3d, l_rot, l_reproj, l_cls, l_reg, weights=LossWeights()):
    """
    Weighted sum of the five loss components

    :param l_3d: 3D vertices loss [:math:`-`]
    :param l_rot: Rotation loss [:math:`rad`]
    :param l_reproj: Reprojection loss [:math:`px`]
    :param l_cls: Classification loss [:math:`-`]
    :param l_reg: Box regression loss [:math:`-`]
    :param weights: :class:`LossWeights` (optional, default= (50, 1, 1, 0.5, 2.5))

    .. math::
        L = \\alpha_{3D} L_{3D} + \\alpha_R L_R + \\alpha_{reproj} L_{reproj} + \\alpha_c L_c + \\alpha_{reg} L_{reg}

    :returns: Dictionary with the following keys:

        - 'total [-]': Weighted total
        - 'breakdown [-]': :class:`LossBreakdown`

    """
    total = weights.w_3d * l_3d + weights.w_rot * l_rot + weights.w_reproj * l_reproj + \
        weights.w_cls * l_cls + weights.w_reg * l_reg
    return {
        'total [-]': total,
        'breakdown [-]': LossBreakdown(l_3d, l_rot, l_reproj, l_cls, l_reg, total),
    }


def finite_difference_check(f, x, analytic_grad, eps=1e-6):
    """
    Compares an analytic gradient with central finite differences. The relative error of each entry uses the
    denominator :math:`\\max(|g_{fd}|, |g_{an}|, 10^{-8})`.

    :param f: Scalar function of a vector
    :param x: Point of evaluation (scalar or vector)
    :param analytic_grad: Analytic gradient at ``x``
    :param eps: Step (:math:`\\epsilon`) (optional, default= 1e-6)

    .. math::
        g_{fd,i} = \\frac{f(x + \\epsilon e_i) - f(x - \\epsilon e_i)}{2 \\epsilon}

    :returns: Dictionary with the following keys:

        - 'max_relative_error [-]': Largest relative error over all entries
        - 'numerical_gradient [-]': Finite-difference gradient
        - 'relative_errors [-]': Relative error per entry

    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    analytic = np.atleast_1d(np.asarray(analytic_grad, dtype=float)).reshape(x.shape)
    numerical = np.zeros(x.size)
    flat = x.ravel()
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += eps
        xm[i] -= eps
        numerical[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (xp[i] - xm[i])
    numerical = numerical.reshape(x.shape)
    denominator = np.maximum(np.maximum(np.abs(numerical), np.abs(analytic)), 1e-8)
    errors = np.abs(numerical - analytic) / denominator
    return {
        'max_relative_error [-]': float(errors.max()) if errors.size else 0.0,
        'numerical_gradient [-]': numerical,
        'relative_errors [-]': errors,
    }
