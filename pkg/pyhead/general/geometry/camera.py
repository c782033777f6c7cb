#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general.validation import Validator
from pyhead.general.exceptions import ValidationError
from pyhead.general.geometry.boxes import BBox
from pyhead.general.geometry.rotation import matrix_to_euler
from pyhead.model.assets import ModelAssets
from pyhead.model.synthesis import select


class ProjectedHead(object):
    """
    Head mesh after the weak-perspective camera. Image coordinates have x to the right and y down,
    depth grows towards the viewer.

    :param points2d: Projected vertices, n x 2 [:math:`px`]
    :param depth: Camera-space depth per vertex, scaled by the camera scale [:math:`px`]
    :param rotation: Global rotation matrix
    :param translation: 2D translation [:math:`px`]
    :param scale: Pixels per model unit [:math:`px`]
    """

    def __init__(self, points2d, depth, rotation, translation, scale):
        self.points2d = np.asarray(points2d, dtype=float)
        self.depth = np.asarray(depth, dtype=float)
        if self.points2d.ndim != 2 or self.points2d.shape[1] != 2 or self.depth.shape != (self.points2d.shape[0],):
            raise ValidationError("points2d (n x 2) and depth (n) must describe the same vertices")
        self.rotation = np.asarray(rotation, dtype=float)
        self.translation = np.asarray(translation, dtype=float)
        self.scale = float(scale)

    @property
    def n_points(self):
        return self.points2d.shape[0]


PROJECT = {
    'vertices': {'type': 'array', 'shape': (None, 3)},
    'rotation': {'type': 'array', 'shape': (3, 3)},
    'scale': {'type': 'float', 'min_value': 0.0, 'max_value': None, 'min_exclusive': True},
    'translation': {'type': 'array', 'shape': (2,)},
}

PROJECT_ERRORRETURN = {
    'projected_head [-]': None,
    'points2d [px]': None,
    'depth [px]': None,
    'camera_vertices [model]': None,
}


@Validator(PROJECT, PROJECT_ERRORRETURN)
def project(vertices, rotation, scale, translation):
    """
    Weak-perspective (scaled orthographic) projection of canonical vertices. The vertices are rotated,
    the x and y coordinates are scaled and translated. The image y-axis points down, so the camera-space
    y-coordinate changes sign.

    :param vertices: Canonical vertices, n x 3 [:math:`model`]
    :param rotation: Global rotation matrix (:math:`R`) [:math:`-`]
    :param scale: Pixels per model unit (:math:`s`) [:math:`px`] - Suggested range: 0.0 < scale
    :param translation: 2D translation (:math:`t`) [:math:`px`]

    .. math::
        c_i = R v_i

        p_i = s \\cdot (c_{i,x}, -c_{i,y}) + t

        z_i = s \\cdot c_{i,z}

    :returns: Dictionary with the following keys:

        - 'projected_head [-]': :class:`ProjectedHead`
        - 'points2d [px]': Projected points, n x 2
        - 'depth [px]': Depth per vertex, larger is nearer to the viewer
        - 'camera_vertices [model]': Rotated vertices :math:`c_i`, n x 3

    """
    vertices = np.asarray(vertices, dtype=float)
    rotation = np.asarray(rotation, dtype=float)
    translation = np.asarray(translation, dtype=float)
    camera_vertices = vertices @ rotation.T
    points2d = np.column_stack((scale * camera_vertices[:, 0], -scale * camera_vertices[:, 1])) + translation
    depth = scale * camera_vertices[:, 2]
    return {
        'projected_head [-]': ProjectedHead(points2d, depth, rotation, translation, scale),
        'points2d [px]': points2d,
        'depth [px]': depth,
        'camera_vertices [model]': camera_vertices,
    }


HEAD_BBOX = {
    'proj': {'type': 'instance', 'class': ProjectedHead},
}

HEAD_BBOX_ERRORRETURN = {
    'bbox [px]': None,
    'width [px]': np.nan,
    'height [px]': np.nan,
}


@Validator(HEAD_BBOX, HEAD_BBOX_ERRORRETURN)
def head_bbox(proj):
    """
    Smallest axis-parallel rectangle containing all projected vertices of the head. Vertices hidden by the
    head itself are included.

    :param proj: Projected head (:class:`ProjectedHead`)

    :returns: Dictionary with the following keys:

        - 'bbox [px]': :class:`BBox`, degenerate for a single point
        - 'width [px]': Box width
        - 'height [px]': Box height

    """
    box = BBox.from_points(proj.points2d)
    return {
        'bbox [px]': box,
        'width [px]': box.width,
        'height [px]': box.height,
    }


FACE_BBOX = {
    'proj': {'type': 'instance', 'class': ProjectedHead},
    'assets': {'type': 'instance', 'class': ModelAssets},
    'max_yaw': {'type': 'float', 'min_value': 0.0, 'max_value': np.pi},
}

FACE_BBOX_ERRORRETURN = {
    'bbox [px]': None,
    'yaw [rad]': np.nan,
    'visible [-]': None,
}


@Validator(FACE_BBOX, FACE_BBOX_ERRORRETURN)
def face_bbox(proj, assets, max_yaw=0.5 * np.pi, min_area=None):
    """
    Face box recovered as the minimum bounding rectangle of the projected facial-region vertices. Faces turned
    away from the camera (:math:`|yaw| > \\pi/2`) do not yield a box; the boundary itself does.

    Parameters of very small heads are ambiguous. When ``min_area`` is given, faces whose box area is below it
    do not yield a box either; ``min_area='vertices'`` uses the number of model vertices as the threshold.

    :param proj: Projected head (:class:`ProjectedHead`)
    :param assets: Head model providing ``face_indices``
    :param max_yaw: Largest absolute yaw of a visible face [:math:`rad`] (optional, default= :math:`\\pi/2`)
    :param min_area: Smallest face box area [:math:`px^2`] (optional, default= None)

    :returns: Dictionary with the following keys:

        - 'bbox [px]': :class:`BBox` or None when the face is not visible
        - 'yaw [rad]': Yaw extracted from the rotation of the projected head
        - 'visible [-]': True when a box is returned

    """
    yaw = matrix_to_euler(proj.rotation, validate=False, fail_silently=False)['yaw [rad]']
    box = None
    if abs(yaw) <= max_yaw:
        box = BBox.from_points(select(assets.face_indices, proj.points2d))
        if min_area is not None:
            threshold = float(assets.n_vertices) if min_area == 'vertices' else float(min_area)
            if box.area < threshold:
                box = None
    return {
        'bbox [px]': box,
        'yaw [rad]': yaw,
        'visible [-]': box is not None,
    }


ALIGNMENT_CROP = {
    'proj': {'type': 'instance', 'class': ProjectedHead},
    'assets': {'type': 'instance', 'class': ModelAssets},
    'margin': {'type': 'float', 'min_value': 0.0, 'max_value': None, 'min_exclusive': True},
}

ALIGNMENT_CROP_ERRORRETURN = {
    'crop [px]': None,
    'center [px]': None,
    'side [px]': np.nan,
}


@Validator(ALIGNMENT_CROP, ALIGNMENT_CROP_ERRORRETURN)
def alignment_crop(proj, assets, margin=1.3):
    """
    Scale-preserving square crop for head alignment. The model origin coincides with the centre of the template,
    so its projection, the translation, is the centre of the crop regardless of the head pose. The side length
    only depends on the camera scale, the margin and the bounding-sphere diameter of the template. The crop may
    extend past the image borders, in which case the caller pads the image.

    :param proj: Projected head (:class:`ProjectedHead`)
    :param assets: Head model providing the bounding-sphere diameter :math:`D`
    :param margin: Margin factor (:math:`\\kappa`) [:math:`-`] (optional, default= 1.3) - Suggested range: 0.0 < margin

    .. math::
        a = \\kappa \\cdot s \\cdot D

        \\text{crop} = (t_x - a/2, t_y - a/2, t_x + a/2, t_y + a/2)

    :returns: Dictionary with the following keys:

        - 'crop [px]': Square :class:`BBox`
        - 'center [px]': Crop centre (the projected model origin)
        - 'side [px]': Side length :math:`a`

    """
    side = margin * proj.scale * assets.bounding_sphere_diameter
    cx, cy = float(proj.translation[0]), float(proj.translation[1])
    half = 0.5 * side
    return {
        'crop [px]': BBox(cx - half, cy - half, cx + half, cy + half),
        'center [px]': (cx, cy),
        'side [px]': side,
    }


def alignment_transform(crop, output_size):
    """
    Uniform scale and offset mapping image pixels into an aligned crop resampled to ``output_size`` pixels,
    :math:`p' = k p + o`.

    :returns: Dictionary with the keys 'scale [-]' and 'offset [px]'
    """
    if crop.width <= 0.0:
        raise ValidationError("The crop has no extent")
    if output_size <= 0:
        raise ValidationError("output_size must be positive")
    k = float(output_size) / crop.width
    return {
        'scale [-]': k,
        'offset [px]': np.array([-k * crop.x1, -k * crop.y1]),
    }


def landmarks_2d(proj, assets):
    """
    2D landmarks of a projected head, in the order of ``assets.landmark_indices``
    """
    return select(assets.landmark_indices, proj.points2d)
