#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import math

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general.validation import Validator
from pyhead.general.exceptions import ValidationError


class BBox(object):
    """
    Axis-aligned box in image coordinates (x to the right, y down) given by its corners
    :math:`(x_1, y_1)` and :math:`(x_2, y_2)` in pixels. A box with zero width or height is degenerate
    but valid. Boxes are immutable values.

    :param x1: Left edge [:math:`px`]
    :param y1: Top edge [:math:`px`]
    :param x2: Right edge, :math:`x_2 \\geq x_1` [:math:`px`]
    :param y2: Bottom edge, :math:`y_2 \\geq y_1` [:math:`px`]

    .. math::
        w = x_2 - x_1, \\quad h = y_2 - y_1, \\quad A = w h

    """

    __slots__ = ('_x1', '_y1', '_x2', '_y2')

    def __init__(self, x1, y1, x2, y2):
        coords = tuple(float(c) for c in (x1, y1, x2, y2))
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError("Box corners must be finite, got %s" % str(coords))
        if coords[2] < coords[0] or coords[3] < coords[1]:
            raise ValidationError("Box corners must satisfy x1 <= x2 and y1 <= y2, got %s" % str(coords))
        self._x1, self._y1, self._x2, self._y2 = coords

    @classmethod
    def from_points(cls, points):
        """
        Smallest axis-aligned box containing all points of an n x 2 array
        """
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] == 0:
            raise ValidationError("At least one 2D point is required to build a bounding box")
        lower = points.min(axis=0)
        upper = points.max(axis=0)
        return cls(lower[0], lower[1], upper[0], upper[1])

    @classmethod
    def from_list(cls, values):
        if len(values) != 4:
            raise ValidationError("A box needs four coordinates, got %i" % len(values))
        return cls(*values)

    @property
    def x1(self):
        return self._x1

    @property
    def y1(self):
        return self._y1

    @property
    def x2(self):
        return self._x2

    @property
    def y2(self):
        return self._y2

    @property
    def width(self):
        return self._x2 - self._x1

    @property
    def height(self):
        return self._y2 - self._y1

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return 0.5 * (self._x1 + self._x2), 0.5 * (self._y1 + self._y2)

    @property
    def is_degenerate(self):
        return self.width <= 0.0 or self.height <= 0.0

    def as_list(self):
        return [self._x1, self._y1, self._x2, self._y2]

    def as_array(self):
        return np.array(self.as_list())

    def contains(self, other):
        return (self._x1 <= other.x1 and self._y1 <= other.y1 and
                self._x2 >= other.x2 and self._y2 >= other.y2)

    def intersection_area(self, other):
        width = min(self._x2, other.x2) - max(self._x1, other.x1)
        height = min(self._y2, other.y2) - max(self._y1, other.y1)
        if width <= 0.0 or height <= 0.0:
            return 0.0
        return width * height

    def clamp(self, width, height):
        """
        Box clipped to the image :math:`[0, W] \\times [0, H]`
        """
        x1 = min(max(self._x1, 0.0), width)
        x2 = min(max(self._x2, 0.0), width)
        y1 = min(max(self._y1, 0.0), height)
        y2 = min(max(self._y2, 0.0), height)
        return BBox(x1, y1, x2, y2)

    def flip_horizontal(self, width):
        """
        Box mirrored about the vertical centre line of an image of the given width
        """
        return BBox(width - self._x2, self._y1, width - self._x1, self._y2)

    def __eq__(self, other):
        return isinstance(other, BBox) and self.as_list() == other.as_list()

    def __hash__(self):
        return hash(tuple(self.as_list()))

    def __repr__(self):
        return "BBox(%r, %r, %r, %r)" % tuple(self.as_list())


IOU = {
    'a': {'type': 'instance', 'class': BBox},
    'b': {'type': 'instance', 'class': BBox},
}

IOU_ERRORRETURN = {
    'iou [-]': np.nan,
    'intersection [px2]': np.nan,
    'union [px2]': np.nan,
}


@Validator(IOU, IOU_ERRORRETURN)
def iou(a, b):
    """
    Intersection over union of two axis-aligned boxes. Boxes without area have an IoU of 0 by convention,
    also with themselves.

    :param a: First box
    :param b: Second box

    .. math::
        IoU = \\frac{|a \\cap b|}{|a| + |b| - |a \\cap b|}

    :returns: Dictionary with the following keys:

        - 'iou [-]': Intersection over union in the range [0, 1]
        - 'intersection [px2]': Intersection area
        - 'union [px2]': Union area

    """
    intersection = a.intersection_area(b)
    union = a.area + b.area - intersection
    if a.is_degenerate or b.is_degenerate or union <= 0.0:
        value = 0.0
    else:
        value = intersection / union
    return {
        'iou [-]': value,
        'intersection [px2]': intersection,
        'union [px2]': union,
    }
