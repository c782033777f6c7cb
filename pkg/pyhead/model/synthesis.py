#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general.validation import Validator
from pyhead.general.exceptions import ValidationError
from pyhead.general.geometry.rotation import axis_angle_to_matrix, axis_angle_vjp
from pyhead.model.assets import ModelAssets, HeadParams


FORWARD_CANONICAL = {
    'assets': {'type': 'instance', 'class': ModelAssets},
    'params': {'type': 'instance', 'class': HeadParams},
}

FORWARD_CANONICAL_ERRORRETURN = {
    'vertices [model]': None,
    'blended [model]': None,
    'jaw_rotation [-]': None,
}


@Validator(FORWARD_CANONICAL, FORWARD_CANONICAL_ERRORRETURN)
def forward_canonical(assets, params):
    """
    Synthesises the canonical head mesh: the template deformed by the shape and expression blendshapes,
    followed by jaw articulation with single-joint linear blend skinning about the jaw pivot. The global
    rotation, translation and scale are not applied (see :func:`pyhead.general.geometry.camera.project`).

    :param assets: Head model (:class:`ModelAssets`)
    :param params: Head parameters (:class:`HeadParams`) with coefficient counts matching the model

    .. math::
        \\bar{v}_i = T_i + \\sum_k \\beta_k S_{k,i} + \\sum_j \\psi_j E_{j,i}

        v_i = p + (1 - w_i) (\\bar{v}_i - p) + w_i R_{jaw} (\\bar{v}_i - p)

    :returns: Dictionary with the following keys:

        - 'vertices [model]': Canonical vertices, n x 3
        - 'blended [model]': Vertices after the blendshapes, before jaw articulation
        - 'jaw_rotation [-]': Jaw rotation matrix :math:`R_{jaw}`

    :raises ValidationError: when the coefficient counts do not match the bases
    """
    params.check_against(assets)
    blended = assets.template + np.tensordot(params.shape, assets.shape_basis, axes=1) + \
        np.tensordot(params.expression, assets.expr_basis, axes=1)
    jaw_rotation = axis_angle_to_matrix(params.jaw, validate=False, fail_silently=False)['rotation_matrix [-]']
    offsets = blended - assets.jaw_pivot
    weights = assets.jaw_weights[:, None]
    # equal to p + (1 - w) (b - p) + w R (b - p), exact where w = 0
    vertices = blended + weights * (offsets @ jaw_rotation.T - offsets)
    return {
        'vertices [model]': vertices,
        'blended [model]': blended,
        'jaw_rotation [-]': jaw_rotation,
    }


def forward_canonical_vjp(assets, params, vertex_gradient):
    """
    Backpropagates the gradient of a scalar with respect to the canonical vertices to the shape, expression
    and jaw parameters.

    :param vertex_gradient: n x 3 gradient :math:`\\partial L / \\partial v`
    :returns: Dictionary with the keys 'shape', 'expression' and 'jaw'
    """
    vertex_gradient = np.asarray(vertex_gradient, dtype=float)
    if vertex_gradient.shape != (assets.n_vertices, 3):
        raise ValidationError("vertex_gradient must have shape (%i, 3)" % assets.n_vertices)
    fw = forward_canonical(assets, params, validate=False, fail_silently=False)
    offsets = fw['blended [model]'] - assets.jaw_pivot
    jaw_rotation = fw['jaw_rotation [-]']
    weights = assets.jaw_weights[:, None]

    # gradient on the blended vertices
    blended_gradient = (1.0 - weights) * vertex_gradient + weights * (vertex_gradient @ jaw_rotation)
    rotation_gradient = (weights * vertex_gradient).T @ offsets

    return {
        'shape': np.tensordot(assets.shape_basis, blended_gradient, axes=([1, 2], [0, 1])),
        'expression': np.tensordot(assets.expr_basis, blended_gradient, axes=([1, 2], [0, 1])),
        'jaw': axis_angle_vjp(params.jaw, rotation_gradient),
    }


def select(index_list, vertices):
    """
    Rows of ``vertices`` at the given indices, in the order of the index list

    :param index_list: Vertex indices, e.g. ``assets.face_indices``
    :param vertices: Array with one row per vertex
    """
    vertices = np.asarray(vertices)
    indices = np.asarray(index_list, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= vertices.shape[0]):
        raise ValidationError("Index list refers to rows outside [0, %i)" % vertices.shape[0])
    return vertices[indices]
