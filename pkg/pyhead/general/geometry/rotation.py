#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import logging

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general.validation import Validator
from pyhead.general.exceptions import SingularInputError, ValidationError

logger = logging.getLogger(__name__)


def skew(vector):
    """
    Cross-product matrix :math:`[v]_{\\times}` of a 3-vector, so that ``skew(a) @ b == np.cross(a, b)``
    """
    x, y, z = vector
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0]])


def wrap_angle(angle):
    """
    Wraps an angle (or an array of angles) to the interval :math:`(-\\pi, \\pi]`
    """
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)


def is_rotation_matrix(matrix, tolerance=1e-10):
    """
    Checks :math:`R^T R = I` (infinity norm) and :math:`\\det R = 1` within the given tolerance
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (3, 3) or not np.all(np.isfinite(matrix)):
        return False
    return (np.abs(matrix.T @ matrix - np.eye(3)).max() <= tolerance and
            abs(np.linalg.det(matrix) - 1.0) <= tolerance)


def check_rotation_matrix(matrix, name='rotation', tolerance=1e-10):
    if not is_rotation_matrix(matrix, tolerance):
        raise ValidationError("%s is not a rotation matrix (orthonormal with determinant 1)" % name)
    return np.asarray(matrix, dtype=float)


class EulerPose(object):
    """
    Yaw-pitch-roll view of a rotation for the convention
    :math:`R = R_z(\\text{roll}) R_y(\\text{yaw}) R_x(\\text{pitch})`.
    Angles are in radians with yaw and roll in :math:`(-\\pi, \\pi]` and pitch in :math:`[-\\pi/2, \\pi/2]`.
    """

    def __init__(self, yaw, pitch, roll):
        self.yaw = float(yaw)
        self.pitch = float(pitch)
        self.roll = float(roll)

    def as_tuple(self):
        return self.yaw, self.pitch, self.roll

    def degrees(self):
        return tuple(np.degrees(self.as_tuple()))

    def __repr__(self):
        return "EulerPose(yaw=%r, pitch=%r, roll=%r)" % self.as_tuple()


ROT6D_TO_MATRIX = {
    'rot6d': {'type': 'array', 'shape': (6,)},
    'singularity_tolerance': {'type': 'float', 'min_value': 0.0, 'max_value': None},
}

ROT6D_TO_MATRIX_ERRORRETURN = {
    'rotation_matrix [-]': None,
    'b1 [-]': None,
    'b2 [-]': None,
    'b3 [-]': None,
}


@Validator(ROT6D_TO_MATRIX, ROT6D_TO_MATRIX_ERRORRETURN)
def rot6d_to_matrix(rot6d, singularity_tolerance=1e-12):
    """
    Converts the continuous 6D rotation representation to a rotation matrix. The first triple is normalised,
    the second triple is orthogonalised against the first (Gram-Schmidt) and the third column completes the
    right-handed frame. The result is invariant to positive scaling of either triple.

    :param rot6d: Two stacked 3-vectors :math:`(a_1, a_2)` [:math:`-`]
    :param singularity_tolerance: Norm below which a triple is considered degenerate [:math:`-`] (optional, default= 1e-12)

    .. math::
        b_1 = \\frac{a_1}{\\| a_1 \\|}

        b_2 = \\frac{a_2 - (b_1 \\cdot a_2) b_1}{\\| a_2 - (b_1 \\cdot a_2) b_1 \\|}

        b_3 = b_1 \\times b_2

        R = [b_1 \\; b_2 \\; b_3]

    :returns: Dictionary with the following keys:

        - 'rotation_matrix [-]': Rotation matrix with columns :math:`b_1, b_2, b_3`
        - 'b1 [-]': First column
        - 'b2 [-]': Second column
        - 'b3 [-]': Third column

    :raises SingularInputError: when :math:`a_1` or the orthogonal residual of :math:`a_2` vanishes

    Reference - Zhou, Y., Barnes, C., Lu, J., Yang, J., Li, H. (2019). On the continuity of rotation
    representations in neural networks. CVPR.

    """
    a = np.asarray(rot6d, dtype=float)
    a1, a2 = a[:3], a[3:]
    n1 = np.linalg.norm(a1)
    if n1 <= singularity_tolerance:
        raise SingularInputError("First triple of the 6D rotation has (near) zero norm")
    b1 = a1 / n1
    residual = a2 - np.dot(b1, a2) * b1
    n2 = np.linalg.norm(residual)
    if n2 <= singularity_tolerance:
        raise SingularInputError("Second triple of the 6D rotation is (nearly) parallel to the first")
    b2 = residual / n2
    b3 = np.cross(b1, b2)

    return {
        'rotation_matrix [-]': np.column_stack((b1, b2, b3)),
        'b1 [-]': b1,
        'b2 [-]': b2,
        'b3 [-]': b3,
    }


def rot6d_from_matrix(matrix):
    """
    First two columns of a rotation matrix, the inverse of :func:`rot6d_to_matrix` on SO(3)
    """
    matrix = np.asarray(matrix, dtype=float)
    return np.concatenate((matrix[:, 0], matrix[:, 1]))


def rot6d_vjp(rot6d, matrix_gradient):
    """
    Backpropagates the gradient of a scalar with respect to the rotation matrix to the 6D input vector
    (vector-Jacobian product of the Gram-Schmidt map).

    :param rot6d: 6D rotation vector at which the derivative is evaluated
    :param matrix_gradient: 3x3 gradient :math:`\\partial L / \\partial R`
    :returns: 6-vector :math:`\\partial L / \\partial a`
    """
    a = np.asarray(rot6d, dtype=float)
    grad = np.asarray(matrix_gradient, dtype=float)
    a1, a2 = a[:3], a[3:]
    n1 = np.linalg.norm(a1)
    b1 = a1 / n1
    d = np.dot(b1, a2)
    residual = a2 - d * b1
    n2 = np.linalg.norm(residual)
    b2 = residual / n2

    g_b1 = grad[:, 0] + np.cross(b2, grad[:, 2])
    g_b2 = grad[:, 1] + np.cross(grad[:, 2], b1)

    g_residual = (g_b2 - np.dot(g_b2, b2) * b2) / n2
    g_a2 = g_residual - np.dot(g_residual, b1) * b1
    g_b1 = g_b1 - (np.dot(b1, g_residual) * a2 + d * g_residual)
    g_a1 = (g_b1 - np.dot(g_b1, b1) * b1) / n1

    return np.concatenate((g_a1, g_a2))


def _rodrigues_coefficients(theta):
    # A = sin(t)/t, B = (1 - cos(t))/t^2 and C = A'/t, D = B'/t
    t2 = theta * theta
    if theta < 1e-8:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = 2.0 * np.sin(0.5 * theta) ** 2 / t2
    if theta < 1e-2:
        c = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0 + t2 ** 3 / 45360.0
        d = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0 + t2 ** 3 / 453600.0
    else:
        c = (theta * np.cos(theta) - np.sin(theta)) / theta ** 3
        d = (theta * np.sin(theta) - 2.0 * (1.0 - np.cos(theta))) / theta ** 4
    return a, b, c, d


AXIS_ANGLE_TO_MATRIX = {
    'axis_angle': {'type': 'array', 'shape': (3,)},
}

AXIS_ANGLE_TO_MATRIX_ERRORRETURN = {
    'rotation_matrix [-]': None,
    'angle [rad]': np.nan,
}


@Validator(AXIS_ANGLE_TO_MATRIX, AXIS_ANGLE_TO_MATRIX_ERRORRETURN)
def axis_angle_to_matrix(axis_angle):
    """
    Rodrigues formula for an axis-angle vector whose direction is the rotation axis and whose norm is the
    rotation angle. Below an angle of 1e-8 rad, the coefficients are evaluated with their Taylor series.
    Angles should stay below :math:`\\pi` to avoid the branch cut of the representation.

    :param axis_angle: Axis-angle vector (:math:`\\omega`) [:math:`rad`]

    .. math::
        \\theta = \\| \\omega \\|, \\quad K = [\\omega]_{\\times}

        R = I + \\frac{\\sin \\theta}{\\theta} K + \\frac{1 - \\cos \\theta}{\\theta^2} K^2

    :returns: Dictionary with the following keys:

        - 'rotation_matrix [-]': Rotation matrix
        - 'angle [rad]': Rotation angle :math:`\\theta`

    """
    w = np.asarray(axis_angle, dtype=float)
    theta = np.linalg.norm(w)
    a, b, _, _ = _rodrigues_coefficients(theta)
    k = skew(w)
    return {
        'rotation_matrix [-]': np.eye(3) + a * k + b * (k @ k),
        'angle [rad]': theta,
    }


def axis_angle_vjp(axis_angle, matrix_gradient):
    """
    Backpropagates :math:`\\partial L / \\partial R` through the Rodrigues formula to the axis-angle vector
    """
    w = np.asarray(axis_angle, dtype=float)
    grad = np.asarray(matrix_gradient, dtype=float)
    theta = np.linalg.norm(w)
    a, b, c, d = _rodrigues_coefficients(theta)
    k = skew(w)
    k2 = k @ k
    result = np.zeros(3)
    for i in range(3):
        e = skew(np.eye(3)[i])
        derivative = a * e + b * (e @ k + k @ e) + c * w[i] * k + d * w[i] * k2
        result[i] = np.sum(grad * derivative)
    return result


GEODESIC_DISTANCE = {
    'r1': {'type': 'array', 'shape': (3, 3)},
    'r2': {'type': 'array', 'shape': (3, 3)},
}

GEODESIC_DISTANCE_ERRORRETURN = {
    'geodesic_distance [rad]': np.nan,
    'geodesic_distance [deg]': np.nan,
}


@Validator(GEODESIC_DISTANCE, GEODESIC_DISTANCE_ERRORRETURN)
def geodesic_distance(r1, r2):
    """
    Angle of the relative rotation :math:`R_1 R_2^T`, the length of the shortest path between two rotations.
    The arccosine form is evaluated through the equivalent chordal expression, which is exactly zero for
    identical rotations, symmetric in its arguments and accurate for small angles. The argument of the arcsine
    is clamped to 1 (the counterpart of clamping the trace argument to :math:`[-1, 1]`).

    :param r1: First rotation matrix (:math:`R_1`) [:math:`-`]
    :param r2: Second rotation matrix (:math:`R_2`) [:math:`-`]

    .. math::
        \\theta = \\cos^{-1} \\left( \\frac{\\text{tr}(R_1 R_2^T) - 1}{2} \\right)
        = 2 \\sin^{-1} \\left( \\frac{\\| R_1 - R_2 \\|_F}{\\sqrt{8}} \\right)

    :returns: Dictionary with the following keys:

        - 'geodesic_distance [rad]': Geodesic distance in the range :math:`[0, \\pi]`
        - 'geodesic_distance [deg]': Geodesic distance in degrees

    """
    chord = np.linalg.norm(np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float)) / np.sqrt(8.0)
    angle = 2.0 * np.arcsin(min(1.0, chord))
    return {
        'geodesic_distance [rad]': angle,
        'geodesic_distance [deg]': np.degrees(angle),
    }


EULER_TO_MATRIX = {
    'yaw': {'type': 'float', 'min_value': None, 'max_value': None},
    'pitch': {'type': 'float', 'min_value': None, 'max_value': None},
    'roll': {'type': 'float', 'min_value': None, 'max_value': None},
}

EULER_TO_MATRIX_ERRORRETURN = {
    'rotation_matrix [-]': None,
}


@Validator(EULER_TO_MATRIX, EULER_TO_MATRIX_ERRORRETURN)
def euler_to_matrix(yaw, pitch, roll):
    """
    Builds the rotation matrix for the pose convention used throughout the package, with axes x to the right,
    y up and z towards the viewer. Yaw turns about y, pitch about x and roll about z.

    :param yaw: Rotation about the vertical axis [:math:`rad`]
    :param pitch: Rotation about the horizontal axis [:math:`rad`]
    :param roll: Rotation about the viewing axis [:math:`rad`]

    .. math::
        R = R_z(\\text{roll}) \\cdot R_y(\\text{yaw}) \\cdot R_x(\\text{pitch})

    :returns: Dictionary with the key 'rotation_matrix [-]'

    """
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    r_x = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    r_y = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    r_z = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return {
        'rotation_matrix [-]': r_z @ r_y @ r_x,
    }


MATRIX_TO_EULER = {
    'rotation_matrix': {'type': 'array', 'shape': (3, 3)},
    'gimbal_tolerance': {'type': 'float', 'min_value': 0.0, 'max_value': None},
}

MATRIX_TO_EULER_ERRORRETURN = {
    'pose [-]': None,
    'yaw [rad]': np.nan,
    'pitch [rad]': np.nan,
    'roll [rad]': np.nan,
    'yaw [deg]': np.nan,
    'pitch [deg]': np.nan,
    'roll [deg]': np.nan,
}


@Validator(MATRIX_TO_EULER, MATRIX_TO_EULER_ERRORRETURN)
def matrix_to_euler(rotation_matrix, gimbal_tolerance=1e-9):
    """
    Extracts yaw, pitch and roll for the convention of :func:`euler_to_matrix`. Every rotation has two
    solutions; the one with pitch in :math:`[-\\pi/2, \\pi/2]` is returned so that yaw covers the full circle
    (a head turned away from the camera has :math:`|yaw| > \\pi/2`).

    In the gimbal configuration :math:`|yaw| = \\pi/2` only the combination of pitch and roll is defined.
    Roll is then set to zero, or to :math:`\\pi` when pitch would otherwise leave its range.

    :param rotation_matrix: Rotation matrix (:math:`R`) [:math:`-`]
    :param gimbal_tolerance: Threshold on :math:`\\cos(yaw)` below which the gimbal rule applies [:math:`-`] (optional, default= 1e-9)

    :returns: Dictionary with the following keys:

        - 'pose [-]': :class:`EulerPose`
        - 'yaw [rad]', 'pitch [rad]', 'roll [rad]': Angles in radians
        - 'yaw [deg]', 'pitch [deg]', 'roll [deg]': Angles in degrees

    """
    r = np.asarray(rotation_matrix, dtype=float)
    cos_yaw = np.hypot(r[0, 0], r[1, 0])
    yaw = np.arctan2(-r[2, 0], cos_yaw)

    if cos_yaw < gimbal_tolerance:
        roll = 0.0
        pitch = np.arctan2(-r[1, 2], r[1, 1])
        if abs(pitch) > 0.5 * np.pi:
            pitch = pitch - np.pi if pitch > 0.0 else pitch + np.pi
            roll = np.pi
    else:
        pitch = np.arctan2(r[2, 1], r[2, 2])
        roll = np.arctan2(r[1, 0], r[0, 0])
        if abs(pitch) > 0.5 * np.pi:
            yaw = np.pi - yaw
            pitch = pitch - np.pi if pitch > 0.0 else pitch + np.pi
            roll = roll + np.pi

    yaw, roll = float(wrap_angle(yaw)), float(wrap_angle(roll))
    pitch = float(pitch)

    return {
        'pose [-]': EulerPose(yaw, pitch, roll),
        'yaw [rad]': yaw,
        'pitch [rad]': pitch,
        'roll [rad]': roll,
        'yaw [deg]': np.degrees(yaw),
        'pitch [deg]': np.degrees(pitch),
        'roll [deg]': np.degrees(roll),
    }
