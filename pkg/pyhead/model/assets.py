#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import logging
from collections import OrderedDict

# 3rd party packages
import numpy as np
from scipy.spatial import ConvexHull
from voluptuous import Schema, Required, All, Length, Range

# Project imports
from pyhead.general.validation import validate_integer
from pyhead.general.exceptions import ValidationError
from pyhead.general import jsonio

logger = logging.getLogger(__name__)

ASSET_FILE_VERSION = 1

# Canonical shape dimensions of the full head model
DEFAULT_K_SHAPE = 300
DEFAULT_K_EXPR = 100

# Toy asset geometry (model units)
TOY_BASIS_RMS = 0.05
TOY_JAW_LIMIT = -0.2
TOY_JAW_RAMP = 0.4
TOY_NECK_LIMIT = -0.85
TOY_JAW_PIVOT = (0.0, -0.2, 0.0)

CENTROID_TOLERANCE = 1e-9


def _frozen(array, dtype=float):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


def _index_array(name, values, n_vertices):
    try:
        indices = np.asarray(values)
        if indices.size and not np.issubdtype(indices.dtype, np.integer):
            raise TypeError("non-integer entries")
    except Exception as err:
        raise ValidationError("%s must contain integer vertex indices - %s" % (name, str(err)))
    indices = indices.astype(np.int64).ravel()
    if indices.size == 0:
        raise ValidationError("%s cannot be empty" % name)
    if indices.min() < 0 or indices.max() >= n_vertices:
        raise ValidationError("%s contains indices outside [0, %i)" % (name, n_vertices))
    if np.unique(indices).size != indices.size:
        raise ValidationError("%s contains duplicate indices" % name)
    return _frozen(indices, dtype=np.int64)


class ModelAssets(object):
    """
    Container of the linear statistical head model: template mesh, blendshape bases, jaw skinning data and the
    vertex subsets used by the losses and the bounding boxes. All invariants are checked at construction and
    the arrays are read-only afterwards, so one instance can be shared between threads.

    :param template: Template vertices, n x 3 [:math:`model`]
    :param shape_basis: Shape blendshapes, :math:`K_s` x n x 3 [:math:`model`]
    :param expr_basis: Expression blendshapes, :math:`K_e` x n x 3 [:math:`model`]
    :param jaw_weights: Skinning weight of the jaw joint per vertex, in [0, 1] [:math:`-`]
    :param jaw_pivot: Rotation centre of the jaw [:math:`model`]
    :param triangles: Vertex indices of the mesh faces, m x 3
    :param subsample_indices: Vertices used by the 3D vertices loss (no neck)
    :param face_indices: Vertices of the facial region
    :param landmark_indices: Vertices matching the 2D landmarks

    The template centroid must coincide with the model origin within 1e-9 per axis.
    """

    def __init__(self, template, shape_basis, expr_basis, jaw_weights, jaw_pivot, triangles,
                 subsample_indices, face_indices, landmark_indices):

        template = np.asarray(template, dtype=float)
        if template.ndim != 2 or template.shape[1] != 3 or template.shape[0] < 1:
            raise ValidationError("template must be an n x 3 array of vertices")
        if not np.all(np.isfinite(template)):
            raise ValidationError("template contains non-finite coordinates")
        n = template.shape[0]
        centroid = template.mean(axis=0)
        if np.abs(centroid).max() > CENTROID_TOLERANCE:
            raise ValidationError("template centroid %s is not at the model origin" % str(centroid))

        bases = {}
        for name, basis in (('shape_basis', shape_basis), ('expr_basis', expr_basis)):
            basis = np.asarray(basis, dtype=float)
            if basis.size == 0:
                basis = basis.reshape((0, n, 3))
            if basis.ndim != 3 or basis.shape[1:] != (n, 3):
                raise ValidationError("%s must have shape K x %i x 3, got %s" % (name, n, str(basis.shape)))
            if not np.all(np.isfinite(basis)):
                raise ValidationError("%s contains non-finite entries" % name)
            bases[name] = basis

        jaw_weights = np.asarray(jaw_weights, dtype=float)
        if jaw_weights.shape != (n,):
            raise ValidationError("jaw_weights must have one weight per vertex (%i)" % n)
        if not np.all(np.isfinite(jaw_weights)) or jaw_weights.min() < 0.0 or jaw_weights.max() > 1.0:
            raise ValidationError("jaw_weights must lie in [0, 1]")

        jaw_pivot = np.asarray(jaw_pivot, dtype=float)
        if jaw_pivot.shape != (3,) or not np.all(np.isfinite(jaw_pivot)):
            raise ValidationError("jaw_pivot must be a finite 3-vector")

        triangles = np.asarray(triangles)
        if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] == 0:
            raise ValidationError("triangles must be a non-empty m x 3 array of vertex indices")
        if not np.issubdtype(triangles.dtype, np.integer):
            raise ValidationError("triangles must contain integer vertex indices")
        if triangles.min() < 0 or triangles.max() >= n:
            raise ValidationError("triangles contains indices outside [0, %i)" % n)

        self._template = _frozen(template)
        self._shape_basis = _frozen(bases['shape_basis'])
        self._expr_basis = _frozen(bases['expr_basis'])
        self._jaw_weights = _frozen(jaw_weights)
        self._jaw_pivot = _frozen(jaw_pivot)
        self._triangles = _frozen(triangles, dtype=np.int64)
        self._subsample_indices = _index_array('subsample_indices', subsample_indices, n)
        self._face_indices = _index_array('face_indices', face_indices, n)
        self._landmark_indices = _index_array('landmark_indices', landmark_indices, n)
        self._bounding_sphere_diameter = 2.0 * float(np.sqrt((template ** 2).sum(axis=1)).max())

    @property
    def n_vertices(self):
        return self._template.shape[0]

    @property
    def k_shape(self):
        return self._shape_basis.shape[0]

    @property
    def k_expr(self):
        return self._expr_basis.shape[0]

    @property
    def n_landmarks(self):
        return self._landmark_indices.size

    @property
    def template(self):
        return self._template

    @property
    def shape_basis(self):
        return self._shape_basis

    @property
    def expr_basis(self):
        return self._expr_basis

    @property
    def jaw_weights(self):
        return self._jaw_weights

    @property
    def jaw_pivot(self):
        return self._jaw_pivot

    @property
    def triangles(self):
        return self._triangles

    @property
    def subsample_indices(self):
        return self._subsample_indices

    @property
    def face_indices(self):
        return self._face_indices

    @property
    def landmark_indices(self):
        return self._landmark_indices

    @property
    def bounding_sphere_diameter(self):
        """
        Diameter of the smallest origin-centred sphere enclosing the template [:math:`model`]
        """
        return self._bounding_sphere_diameter

    def to_dict(self):
        return OrderedDict([
            ('version', ASSET_FILE_VERSION),
            ('n_vertices', self.n_vertices),
            ('template', self._template),
            ('shape_basis', self._shape_basis),
            ('expr_basis', self._expr_basis),
            ('jaw_weights', self._jaw_weights),
            ('jaw_pivot', self._jaw_pivot),
            ('triangles', self._triangles),
            ('subsample_indices', self._subsample_indices),
            ('face_indices', self._face_indices),
            ('landmark_indices', self._landmark_indices),
        ])

    @classmethod
    def from_dict(cls, document):
        document = jsonio.check(ASSET_SCHEMA, document, name='asset file')
        n = document['n_vertices']
        if len(document['template']) != n:
            raise ValidationError("template has %i vertices but n_vertices is %i" % (len(document['template']), n))
        return cls(
            template=document['template'],
            shape_basis=_basis_array('shape_basis', document['shape_basis'], n),
            expr_basis=_basis_array('expr_basis', document['expr_basis'], n),
            jaw_weights=document['jaw_weights'],
            jaw_pivot=document['jaw_pivot'],
            triangles=np.array(document['triangles'], dtype=np.int64).reshape((-1, 3)),
            subsample_indices=np.array(document['subsample_indices'], dtype=np.int64),
            face_indices=np.array(document['face_indices'], dtype=np.int64),
            landmark_indices=np.array(document['landmark_indices'], dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, ModelAssets):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.to_dict().values(), other.to_dict().values()))

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return "ModelAssets(n_vertices=%i, k_shape=%i, k_expr=%i, n_landmarks=%i)" % (
            self.n_vertices, self.k_shape, self.k_expr, self.n_landmarks)


def _basis_array(name, nested, n):
    basis = np.array(nested, dtype=float)
    if basis.size == 0:
        return basis.reshape((0, n, 3))
    if basis.ndim != 3:
        raise ValidationError("%s must be a K x n x 3 nested array" % name)
    return basis


ASSET_SCHEMA = Schema({
    Required('version'): ASSET_FILE_VERSION,
    Required('n_vertices'): All(jsonio.integer, Range(min=1)),
    Required('template'): jsonio.matrix(3),
    Required('shape_basis'): [jsonio.matrix(3)],
    Required('expr_basis'): [jsonio.matrix(3)],
    Required('jaw_weights'): jsonio.vector(),
    Required('jaw_pivot'): jsonio.vector(3),
    Required('triangles'): [All([jsonio.integer], Length(min=3, max=3))],
    Required('subsample_indices'): [jsonio.integer],
    Required('face_indices'): [jsonio.integer],
    Required('landmark_indices'): [jsonio.integer],
})


class HeadParams(object):
    """
    Per-head parameter vector: shape and expression coefficients, jaw rotation (axis-angle), global rotation
    in the 6D representation, 2D translation in pixels and scale in pixels per model unit.

    The flat layout used by the fitting engine is ``[shape | expression | jaw (3) | rot6d (6) | translation (2) | scale (1)]``.
    """

    def __init__(self, shape, expression, jaw, rot6d, translation, scale):
        self.shape = self._vector('shape', shape)
        self.expression = self._vector('expression', expression)
        self.jaw = self._vector('jaw', jaw, 3)
        self.rot6d = self._vector('rot6d', rot6d, 6)
        self.translation = self._vector('translation', translation, 2)
        try:
            scale = float(scale)
        except (TypeError, ValueError):
            raise ValidationError("scale must be a number")
        if not np.isfinite(scale) or scale <= 0.0:
            raise ValidationError("scale must be finite and strictly positive, got %s" % str(scale))
        self.scale = scale

    @staticmethod
    def _vector(name, values, length=None):
        array = np.array(values, dtype=float).ravel()
        if length is not None and array.size != length:
            raise ValidationError("%s must have %i entries, got %i" % (name, length, array.size))
        if not np.all(np.isfinite(array)):
            raise ValidationError("%s contains non-finite entries" % name)
        return array

    @classmethod
    def zeros(cls, k_shape=DEFAULT_K_SHAPE, k_expr=DEFAULT_K_EXPR, scale=1.0, translation=(0.0, 0.0)):
        """
        Neutral parameters: zero coefficients and jaw, identity rotation
        """
        return cls(np.zeros(k_shape), np.zeros(k_expr), np.zeros(3), (1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
                   translation, scale)

    @property
    def size(self):
        return self.shape.size + self.expression.size + 12

    def to_vector(self):
        return np.concatenate((self.shape, self.expression, self.jaw, self.rot6d, self.translation, [self.scale]))

    @classmethod
    def from_vector(cls, vector, k_shape, k_expr):
        vector = np.asarray(vector, dtype=float)
        if vector.size != k_shape + k_expr + 12:
            raise ValidationError("Parameter vector has %i entries, expected %i" % (vector.size, k_shape + k_expr + 12))
        i = k_shape + k_expr
        return cls(vector[:k_shape], vector[k_shape:i], vector[i:i + 3], vector[i + 3:i + 9],
                   vector[i + 9:i + 11], vector[i + 11])

    def slices(self):
        """
        Named slices of the flat parameter vector
        """
        k_s, k_e = self.shape.size, self.expression.size
        i = k_s + k_e
        return OrderedDict([
            ('shape', slice(0, k_s)),
            ('expression', slice(k_s, i)),
            ('jaw', slice(i, i + 3)),
            ('rot6d', slice(i + 3, i + 9)),
            ('translation', slice(i + 9, i + 11)),
            ('scale', slice(i + 11, i + 12)),
        ])

    def check_against(self, assets):
        if self.shape.size != assets.k_shape:
            raise ValidationError("shape has %i coefficients, the model has %i" % (self.shape.size, assets.k_shape))
        if self.expression.size != assets.k_expr:
            raise ValidationError("expression has %i coefficients, the model has %i" % (
                self.expression.size, assets.k_expr))
        return True

    def to_dict(self):
        return OrderedDict([
            ('shape', self.shape),
            ('expression', self.expression),
            ('jaw', self.jaw),
            ('rot6d', self.rot6d),
            ('translation', self.translation),
            ('scale', self.scale),
        ])

    @classmethod
    def from_dict(cls, document):
        document = jsonio.check(PARAMS_SCHEMA, document, name='head parameters')
        return cls(**document)

    def copy(self):
        return HeadParams(self.shape, self.expression, self.jaw, self.rot6d, self.translation, self.scale)

    def __eq__(self, other):
        return isinstance(other, HeadParams) and np.array_equal(self.to_vector(), other.to_vector()) and \
            self.shape.size == other.shape.size

    def __repr__(self):
        return "HeadParams(k_shape=%i, k_expr=%i, scale=%r)" % (self.shape.size, self.expression.size, self.scale)


PARAMS_SCHEMA = Schema({
    Required('shape'): jsonio.vector(),
    Required('expression'): jsonio.vector(),
    Required('jaw'): jsonio.vector(3),
    Required('rot6d'): jsonio.vector(6),
    Required('translation'): jsonio.vector(2),
    Required('scale'): jsonio.finite_number,
})


def _fibonacci_sphere(n_vertices):
    i = np.arange(n_vertices, dtype=float)
    y = 1.0 - 2.0 * (i + 0.5) / n_vertices
    radius = np.sqrt(1.0 - y * y)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.column_stack((radius * np.cos(phi), y, radius * np.sin(phi)))


def _outward_triangles(points):
    """
    Triangulates a convex point cloud and orients every face counter-clockwise seen from outside.
    Each face is rotated so that its smallest index comes first and the faces are sorted.
    """
    simplices = ConvexHull(points).simplices
    centre = points.mean(axis=0)
    faces = []
    for a, b, c in simplices:
        normal = np.cross(points[b] - points[a], points[c] - points[a])
        if np.dot(normal, points[a] + points[b] + points[c] - 3.0 * centre) < 0.0:
            b, c = c, b
        face = [int(a), int(b), int(c)]
        k = face.index(min(face))
        faces.append(face[k:] + face[:k])
    return np.array(sorted(faces), dtype=np.int64)


def _random_basis(rng, count, n_vertices, rms):
    basis = rng.standard_normal((count, n_vertices, 3))
    for k in range(count):
        basis[k] *= rms / np.sqrt(np.mean(np.sum(basis[k] ** 2, axis=1)))
    return basis


def generate_toy_assets(seed, n_vertices, k_shape, k_expr, n_landmarks):
    """
    Generates a small deterministic head model to stand in for the licensed assets. The template is a
    triangulated unit sphere (Fibonacci lattice) centred at the origin. Blendshapes are seeded pseudo-random
    displacement fields with an RMS displacement of 0.05 model units per basis vector. The jaw acts on the
    lower part of the head (y below -0.2) with weights ramping to 1, and the neck band (y below -0.85) is left
    out of the loss subsample. The facial region is the quarter of the vertices facing the viewer (largest z)
    and landmarks are drawn from it.

    :param seed: Seed of the pseudo-random generator [:math:`-`]
    :param n_vertices: Number of vertices [:math:`-`] - Suggested range: 12 <= n_vertices
    :param k_shape: Number of shape blendshapes [:math:`-`] - Suggested range: 1 <= k_shape
    :param k_expr: Number of expression blendshapes [:math:`-`] - Suggested range: 1 <= k_expr
    :param n_landmarks: Number of landmark vertices [:math:`-`] - Suggested range: 1 <= n_landmarks <= n_vertices

    :returns: :class:`ModelAssets`, bit-identical for identical arguments
    :raises ValidationError: for counts below their minimum
    """
    validate_integer('seed', seed, min_value=0)
    validate_integer('n_vertices', n_vertices, min_value=12)
    validate_integer('k_shape', k_shape, min_value=1)
    validate_integer('k_expr', k_expr, min_value=1)
    validate_integer('n_landmarks', n_landmarks, min_value=1, max_value=n_vertices)

    rng = np.random.RandomState(seed)
    points = _fibonacci_sphere(n_vertices)
    triangles = _outward_triangles(points)
    template = points - points.mean(axis=0)

    shape_basis = _random_basis(rng, k_shape, n_vertices, TOY_BASIS_RMS)
    expr_basis = _random_basis(rng, k_expr, n_vertices, TOY_BASIS_RMS)

    y = template[:, 1]
    jaw_weights = np.clip((TOY_JAW_LIMIT - y) / TOY_JAW_RAMP, 0.0, 1.0)

    subsample_indices = np.flatnonzero(y >= TOY_NECK_LIMIT)

    n_face = max(int(np.ceil(n_vertices / 4.0)), 1)
    face_indices = np.sort(np.argsort(-template[:, 2], kind='stable')[:n_face])
    candidates = face_indices if n_landmarks <= face_indices.size else np.arange(n_vertices)
    landmark_indices = np.sort(rng.permutation(candidates)[:n_landmarks])

    logger.debug("Generated toy assets with %i vertices, %i triangles" % (n_vertices, triangles.shape[0]))

    return ModelAssets(template=template, shape_basis=shape_basis, expr_basis=expr_basis,
                       jaw_weights=jaw_weights, jaw_pivot=TOY_JAW_PIVOT, triangles=triangles,
                       subsample_indices=subsample_indices, face_indices=face_indices,
                       landmark_indices=landmark_indices)


def save_assets(assets, path):
    """
    Writes the assets as a UTF-8 JSON document. Floats are written with their shortest round-trip
    representation so that :func:`load_assets` restores the arrays bit-exactly.
    """
    jsonio.dump_json(assets.to_dict(), path, indent=None)


def load_assets(path):
    """
    Reads an asset JSON document and checks every invariant of :class:`ModelAssets`.

    :raises ValidationError: with the name of the offending field for malformed documents
    """
    return ModelAssets.from_dict(jsonio.load_json(path))


def export_obj(vertices, triangles, path):
    """
    Writes a Wavefront OBJ file with ``v`` records (9 significant digits) and 1-based ``f`` records
    """
    vertices = np.asarray(vertices, dtype=float)
    with open(path, 'w', encoding='utf-8') as f:
        for x, y, z in vertices:
            f.write("v %.9g %.9g %.9g\n" % (x, y, z))
        for a, b, c in np.asarray(triangles):
            f.write("f %i %i %i\n" % (a + 1, b + 1, c + 1))


def sample_params(assets, seed, coefficient_sigma=1.0, jaw_sigma=0.1, translation=(0.0, 0.0), scale=1.0):
    """
    Draws deterministic random head parameters for synthetic problems. Coefficients and jaw angles are
    normally distributed and the rotation is a uniformly random unit 6D pair.
    """
    rng = np.random.RandomState(seed)
    rot6d = rng.standard_normal(6)
    rot6d[:3] /= np.linalg.norm(rot6d[:3])
    rot6d[3:] -= np.dot(rot6d[:3], rot6d[3:]) * rot6d[:3]
    rot6d[3:] /= np.linalg.norm(rot6d[3:])
    return HeadParams(shape=coefficient_sigma * rng.standard_normal(assets.k_shape),
                      expression=coefficient_sigma * rng.standard_normal(assets.k_expr),
                      jaw=jaw_sigma * rng.standard_normal(3),
                      rot6d=rot6d, translation=translation, scale=scale)
