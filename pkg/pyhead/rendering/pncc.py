#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import logging

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general.validation import Validator
from pyhead.general.exceptions import ValidationError
from pyhead.general.geometry.rotation import rot6d_to_matrix
from pyhead.general.geometry.camera import ProjectedHead, project, alignment_crop, alignment_transform
from pyhead.model.assets import ModelAssets, HeadParams
from pyhead.model.synthesis import forward_canonical
from pyhead.optimisation.losses import normalize_unit_cube

logger = logging.getLogger(__name__)

PPM_MAXVAL = 255


class RasterImage(object):
    """
    8-bit RGB image stored row by row (top row first)

    :param width: Image width [:math:`px`]
    :param height: Image height [:math:`px`]
    :param rgb: Array of shape height x width x 3 (optional, default= black image)
    """

    def __init__(self, width, height, rgb=None):
        if int(width) <= 0 or int(height) <= 0:
            raise ValidationError("Image dimensions must be positive, got %s x %s" % (str(width), str(height)))
        self.width = int(width)
        self.height = int(height)
        if rgb is None:
            rgb = np.zeros((self.height, self.width, 3), dtype=np.uint8)
        rgb = np.asarray(rgb, dtype=np.uint8)
        if rgb.shape != (self.height, self.width, 3):
            raise ValidationError("Pixel buffer has shape %s, expected %s" % (
                str(rgb.shape), str((self.height, self.width, 3))))
        self.rgb = rgb

    def pixel(self, x, y):
        return tuple(int(c) for c in self.rgb[y, x])

    def to_bytes(self):
        return self.rgb.tobytes()

    def __eq__(self, other):
        return isinstance(other, RasterImage) and self.rgb.shape == other.rgb.shape and \
            np.array_equal(self.rgb, other.rgb)


NCC_ENCODE = {
    'vertices': {'type': 'array', 'shape': (None, 3)},
}

NCC_ENCODE_ERRORRETURN = {
    'colors [-]': None,
}


@Validator(NCC_ENCODE, NCC_ENCODE_ERRORRETURN)
def ncc_encode(vertices):
    """
    Normalised coordinate code of a head mesh: the canonical vertices normalised to the unit cube, with the
    x, y and z coordinates used as red, green and blue.

    :param vertices: Canonical vertices, n x 3 [:math:`model`]

    :returns: Dictionary with the key 'colors [-]', per-vertex colours in :math:`[0, 1]^3`

    :raises DegenerateGeometryError: for a mesh without extent
    """
    return {
        'colors [-]': normalize_unit_cube(vertices, validate=False, fail_silently=False)['vertices [-]'],
    }


def quantize(colors):
    """
    Colours in [0, 1] to 8-bit values, rounding half up
    """
    return np.floor(np.clip(colors, 0.0, 1.0) * PPM_MAXVAL + 0.5).astype(np.int64)


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _is_top_left(ax, ay, bx, by):
    # y points down and the interior lies on the positive side of each edge
    dx, dy = bx - ax, by - ay
    return (dy == 0.0 and dx > 0.0) or dy < 0.0


def _covered(w, top_left):
    return (w > 0.0) | ((w == 0.0) & top_left)


RASTERIZE = {
    'proj': {'type': 'instance', 'class': ProjectedHead},
    'width': {'type': 'int', 'min_value': 1, 'max_value': None},
    'height': {'type': 'int', 'min_value': 1, 'max_value': None},
}

RASTERIZE_ERRORRETURN = {
    'image [-]': None,
    'depth [px]': None,
    'coverage [-]': None,
}


@Validator(RASTERIZE, RASTERIZE_ERRORRETURN)
def rasterize(proj, triangles, colors, width, height):
    """
    Z-buffer rasteriser for projected triangle meshes with per-vertex colours. Triangles are sampled at pixel
    centres :math:`(i + 0.5, j + 0.5)` with edge functions and the top-left fill rule, so pixels on a shared edge
    belong to exactly one triangle. The fragment nearest to the viewer (largest depth) is kept; fragments at
    equal depth keep the smaller 8-bit colour. Colours are interpolated with barycentric weights, which is exact
    for the weak-perspective camera, and rounded half up. The background is black.

    :param proj: Projected mesh (:class:`ProjectedHead`) in image pixels
    :param triangles: Vertex index triples, m x 3
    :param colors: Per-vertex colours in :math:`[0, 1]^3`, n x 3
    :param width: Image width [:math:`px`]
    :param height: Image height [:math:`px`]

    .. math::
        E_{ab}(p) = (b_x - a_x)(p_y - a_y) - (b_y - a_y)(p_x - a_x)

        \\lambda_a = \\frac{E_{bc}(p)}{E_{ab}(c)}, \\quad \\lambda_b = \\frac{E_{ca}(p)}{E_{ab}(c)},
        \\quad \\lambda_c = \\frac{E_{ab}(p)}{E_{ab}(c)}

    :returns: Dictionary with the following keys:

        - 'image [-]': :class:`RasterImage`
        - 'depth [px]': Depth buffer, -inf for background pixels
        - 'coverage [-]': Number of triangles covering each pixel centre

    """
    triangles = np.asarray(triangles, dtype=np.int64)
    colors = np.asarray(colors, dtype=float)
    points, depth = proj.points2d, proj.depth
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise ValidationError("triangles must be an m x 3 index array")
    if triangles.size and (triangles.min() < 0 or triangles.max() >= proj.n_points):
        raise ValidationError("triangles refer to vertices outside [0, %i)" % proj.n_points)
    if colors.shape != (proj.n_points, 3):
        raise ValidationError("colors must have shape (%i, 3)" % proj.n_points)

    zbuffer = np.full((height, width), -np.inf)
    keys = np.zeros((height, width), dtype=np.int64)
    rgb = np.zeros((height, width, 3), dtype=np.int64)
    coverage = np.zeros((height, width), dtype=np.int64)

    for a, b, c in triangles:
        (ax, ay), (bx, by), (cx, cy) = points[a], points[b], points[c]
        area = _edge(ax, ay, bx, by, cx, cy)
        if area == 0.0:
            continue
        if area < 0.0:
            b, c = c, b
            (bx, by), (cx, cy) = (cx, cy), (bx, by)
            area = -area

        x0 = max(int(np.floor(min(ax, bx, cx) - 0.5)), 0)
        x1 = min(int(np.ceil(max(ax, bx, cx) - 0.5)), width - 1)
        y0 = max(int(np.floor(min(ay, by, cy) - 0.5)), 0)
        y1 = min(int(np.ceil(max(ay, by, cy) - 0.5)), height - 1)
        if x0 > x1 or y0 > y1:
            continue
        px, py = np.meshgrid(np.arange(x0, x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5)

        w_a = _edge(bx, by, cx, cy, px, py)
        w_b = _edge(cx, cy, ax, ay, px, py)
        w_c = _edge(ax, ay, bx, by, px, py)
        inside = _covered(w_a, _is_top_left(bx, by, cx, cy)) & \
            _covered(w_b, _is_top_left(cx, cy, ax, ay)) & \
            _covered(w_c, _is_top_left(ax, ay, bx, by))
        if not inside.any():
            continue

        l_a, l_b, l_c = w_a[inside] / area, w_b[inside] / area, w_c[inside] / area
        z = l_a * depth[a] + l_b * depth[b] + l_c * depth[c]
        fragment = quantize(l_a[:, None] * colors[a] + l_b[:, None] * colors[b] + l_c[:, None] * colors[c])
        key = (fragment[:, 0] << 16) | (fragment[:, 1] << 8) | fragment[:, 2]

        rows, cols = np.nonzero(inside)
        rows, cols = rows + y0, cols + x0
        coverage[rows, cols] += 1
        current_z, current_key = zbuffer[rows, cols], keys[rows, cols]
        # depth = s * z with +z towards the camera, so the larger depth is nearer the viewer
        wins = (z > current_z) | ((z == current_z) & (key < current_key))
        rows, cols = rows[wins], cols[wins]
        zbuffer[rows, cols] = z[wins]
        keys[rows, cols] = key[wins]
        rgb[rows, cols] = fragment[wins]

    return {
        'image [-]': RasterImage(width, height, rgb.astype(np.uint8)),
        'depth [px]': zbuffer,
        'coverage [-]': coverage,
    }


def ppm_bytes(image):
    header = "P6\n%i %i\n%i\n" % (image.width, image.height, PPM_MAXVAL)
    return header.encode('ascii') + image.to_bytes()


def write_ppm(image, path):
    """
    Writes a binary PPM (P6) file: the header ``P6\\n<width> <height>\\n255\\n`` followed by the raw RGB bytes
    """
    with open(path, 'wb') as f:
        f.write(ppm_bytes(image))


def read_ppm(path):
    """
    Reads a binary PPM (P6) file with a maximum value of 255

    :raises ValidationError: for other formats or truncated files
    """
    with open(path, 'rb') as f:
        data = f.read()
    tokens = []
    position = 0
    while len(tokens) < 4:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        start = position
        while position < len(data) and not data[position:position + 1].isspace():
            position += 1
        if start == position:
            raise ValidationError("%s has an incomplete PPM header" % path)
        tokens.append(data[start:position])
    position += 1
    if tokens[0] != b'P6' or int(tokens[3]) != PPM_MAXVAL:
        raise ValidationError("%s is not an 8-bit binary PPM file" % path)
    width, height = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data[position:], dtype=np.uint8)
    if pixels.size != 3 * width * height:
        raise ValidationError("%s holds %i bytes of pixel data, expected %i" % (path, pixels.size, 3 * width * height))
    return RasterImage(width, height, pixels.reshape(height, width, 3))


RENDER_PNCC = {
    'assets': {'type': 'instance', 'class': ModelAssets},
    'params': {'type': 'instance', 'class': HeadParams},
    'size': {'type': 'int', 'min_value': 1, 'max_value': None},
    'margin': {'type': 'float', 'min_value': 0.0, 'max_value': None, 'min_exclusive': True},
}

RENDER_PNCC_ERRORRETURN = {
    'image [-]': None,
    'colors [-]': None,
    'crop [px]': None,
    'projected [-]': None,
}


@Validator(RENDER_PNCC, RENDER_PNCC_ERRORRETURN)
def render_pncc(assets, params, size=256, margin=1.3):
    """
    Renders the projected normalised coordinate code of a head into its alignment crop. The canonical mesh is
    encoded as colours, projected with the head pose and mapped into a square image of ``size`` pixels
    covering the alignment crop, so the whole head is in view.

    :param assets: Head model (:class:`ModelAssets`)
    :param params: Head parameters (:class:`HeadParams`)
    :param size: Side of the rendered image [:math:`px`] (optional, default= 256)
    :param margin: Margin factor of the alignment crop [:math:`-`] (optional, default= 1.3)

    :returns: Dictionary with the following keys:

        - 'image [-]': :class:`RasterImage`
        - 'colors [-]': Per-vertex colours before quantisation
        - 'crop [px]': Alignment crop in image pixels
        - 'projected [-]': Projection mapped into the rendered image (:class:`ProjectedHead`)

    """
    canonical = forward_canonical(assets, params, validate=False, fail_silently=False)['vertices [model]']
    colors = ncc_encode(canonical, validate=False, fail_silently=False)['colors [-]']
    rotation = rot6d_to_matrix(params.rot6d, validate=False, fail_silently=False)['rotation_matrix [-]']
    projected = project(canonical, rotation, params.scale, params.translation, validate=False,
                        fail_silently=False)['projected_head [-]']
    crop = alignment_crop(projected, assets, margin, validate=False, fail_silently=False)['crop [px]']
    mapping = alignment_transform(crop, size)
    k, offset = mapping['scale [-]'], mapping['offset [px]']
    in_crop = ProjectedHead(k * projected.points2d + offset, k * projected.depth, rotation,
                            k * projected.translation + offset, k * projected.scale)
    image = rasterize(in_crop, assets.triangles, colors, size, size, validate=False, fail_silently=False)['image [-]']
    logger.debug("Rendered %i triangles into a %i x %i image" % (assets.triangles.shape[0], size, size))
    return {
        'image [-]': image,
        'colors [-]': colors,
        'crop [px]': crop,
        'projected [-]': in_crop,
    }
