#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

import os
import json
import tempfile
import unittest
import numpy as np
from pyhead.general import jsonio
from pyhead.general.exceptions import ValidationError
from pyhead.general.geometry.camera import ProjectedHead
from pyhead.model.assets import ModelAssets, generate_toy_assets, sample_params
from pyhead.rendering import pncc

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'fixtures')
ASSETS = generate_toy_assets(7, 162, 4, 2, 16)

RED = [1.0, 0.0, 0.0]
GREEN = [0.0, 1.0, 0.0]


def flat(points, depth):
    return ProjectedHead(points, depth, np.eye(3), [0.0, 0.0], 1.0)


def two_triangles():
    proj = flat([[0.0, 0.0], [4.0, 0.0], [0.0, 2.0], [4.0, 2.0], [0.0, 2.0], [4.0, 0.0]],
                [0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    return proj, [[0, 1, 2], [3, 4, 5]], [RED, RED, RED, GREEN, GREEN, GREEN]


class Test_ncc_encode(unittest.TestCase):

    def test_values(self):
        colors = pncc.ncc_encode(ASSETS.template)['colors [-]']
        self.assertEqual(colors.shape, (ASSETS.n_vertices, 3))
        self.assertGreaterEqual(colors.min(), 0.0)
        self.assertLessEqual(colors.max(), 1.0)
        self.assertAlmostEqual(colors.max() - colors.min(), 1.0)
        np.testing.assert_allclose(pncc.ncc_encode([[0.0, 0.0, 0.0], [2.0, 1.0, 0.0]])['colors [-]'],
                                   [[0.0, 0.25, 0.5], [1.0, 0.75, 0.5]])

    def test_invariance(self):
        colors = pncc.ncc_encode(ASSETS.template)['colors [-]']
        np.testing.assert_allclose(pncc.ncc_encode(3.0 * ASSETS.template + 5.0)['colors [-]'], colors, atol=1e-12)

    def test_fail_with_error(self):
        self.assertRaises(ValueError, pncc.ncc_encode, [[1.0, 1.0, 1.0]] * 3, fail_silently=False)
        self.assertIsNone(pncc.ncc_encode([[1.0, 1.0, 1.0]] * 3)['colors [-]'])


class Test_quantize(unittest.TestCase):

    def test_values(self):
        np.testing.assert_array_equal(pncc.quantize([0.0, 0.5, 1.0, -0.1, 1.2, 0.998]), [0, 128, 255, 0, 255, 254])


class Test_rasterize(unittest.TestCase):

    def test_values(self):
        proj, triangles, colors = two_triangles()
        result = pncc.rasterize(proj, triangles, colors, 4, 2)
        image = result['image [-]']
        self.assertEqual([image.pixel(x, 0) for x in range(4)],
                         [(255, 0, 0), (255, 0, 0), (255, 0, 0), (0, 255, 0)])
        self.assertEqual([image.pixel(x, 1) for x in range(4)],
                         [(255, 0, 0), (0, 255, 0), (0, 255, 0), (0, 255, 0)])
        np.testing.assert_array_equal(result['coverage [-]'], np.ones((2, 4)))

    def test_golden(self):
        proj, triangles, colors = two_triangles()
        image = pncc.rasterize(proj, triangles, colors, 4, 2)['image [-]']
        with open(os.path.join(FIXTURES, 'two_triangles.ppm'), 'rb') as f:
            self.assertEqual(pncc.ppm_bytes(image), f.read())

    def test_shared_edge(self):
        # pixel centres on the diagonal belong to exactly one triangle
        proj = flat([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]], np.zeros(4))
        result = pncc.rasterize(proj, [[0, 1, 2], [0, 2, 3]], [RED] * 4, 2, 2)
        np.testing.assert_array_equal(result['coverage [-]'], np.ones((2, 2)))
        result = pncc.rasterize(proj, [[0, 2, 1], [0, 3, 2]], [RED] * 4, 2, 2)
        np.testing.assert_array_equal(result['coverage [-]'], np.ones((2, 2)))

    def test_depth_order(self):
        proj = flat([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [0.0, 0.0], [4.0, 0.0], [0.0, 4.0]],
                    [0.0, 0.0, 0.0, 2.0, 2.0, 2.0])
        colors = [RED] * 3 + [GREEN] * 3
        for triangles in ([[0, 1, 2], [3, 4, 5]], [[3, 4, 5], [0, 1, 2]]):
            result = pncc.rasterize(proj, triangles, colors, 4, 4)
            self.assertEqual(result['image [-]'].pixel(0, 0), (0, 255, 0))
            self.assertEqual(result['depth [px]'][0, 0], 2.0)
            self.assertEqual(result['coverage [-]'][0, 0], 2)
        # equal depth keeps the smaller colour
        flat_depth = flat(proj.points2d, np.zeros(6))
        self.assertEqual(pncc.rasterize(flat_depth, [[0, 1, 2], [3, 4, 5]], colors, 4, 4)['image [-]'].pixel(0, 0),
                         (0, 255, 0))

    def test_background(self):
        proj, triangles, colors = two_triangles()
        result = pncc.rasterize(proj, triangles, colors, 6, 3)
        self.assertEqual(result['image [-]'].pixel(5, 2), (0, 0, 0))
        self.assertEqual(result['depth [px]'][2, 5], -np.inf)

    def test_fail_with_error(self):
        proj, triangles, colors = two_triangles()
        self.assertRaises(ValidationError, pncc.rasterize, proj, [[0, 1, 6]], colors, 4, 2, fail_silently=False)
        self.assertRaises(ValidationError, pncc.rasterize, proj, triangles, colors[:3], 4, 2, fail_silently=False)
        self.assertRaises(ValidationError, pncc.rasterize, proj, triangles, colors, 0, 2)


class Test_render_pncc(unittest.TestCase):

    def test_values(self):
        params = sample_params(ASSETS, 3, translation=(50.0, 60.0), scale=20.0)
        result = pncc.render_pncc(ASSETS, params, 64)
        image = result['image [-]']
        self.assertEqual((image.width, image.height), (64, 64))
        self.assertEqual(image.pixel(0, 0), (0, 0, 0))
        self.assertTrue(np.any(image.rgb > 0))
        self.assertEqual(pncc.render_pncc(ASSETS, params, 64)['image [-]'], image)

    def test_colour_hull(self):
        # every foreground colour is produced by one covering triangle and lies between its vertex colours
        params = sample_params(ASSETS, 5, translation=(30.0, 20.0), scale=8.0)
        result = pncc.render_pncc(ASSETS, params, 40)
        image, proj, colors = result['image [-]'], result['projected [-]'], result['colors [-]']
        foreground = pncc.rasterize(proj, ASSETS.triangles, colors, 40, 40)['coverage [-]'] > 0
        self.assertTrue(foreground.any())
        explained = np.zeros_like(foreground)
        for triangle in ASSETS.triangles:
            single = pncc.rasterize(proj, [triangle], colors, 40, 40)
            covered = single['coverage [-]'] > 0
            if not covered.any():
                continue
            vertex_colors = pncc.quantize(colors[triangle])
            fragments = single['image [-]'].rgb[covered].astype(np.int64)
            self.assertTrue(np.all(fragments >= vertex_colors.min(axis=0)))
            self.assertTrue(np.all(fragments <= vertex_colors.max(axis=0)))
            explained[covered] |= np.all(single['image [-]'].rgb[covered] == image.rgb[covered], axis=1)
        np.testing.assert_array_equal(explained, foreground)

    def test_golden_toy_head(self):
        path = os.path.join(FIXTURES, 'toy_head.ppm')
        image = pncc.render_pncc(ASSETS, sample_params(ASSETS, 3, translation=(50.0, 60.0), scale=20.0),
                                 64)['image [-]']
        if os.environ.get('PYHEAD_REGENERATE_FIXTURES'):
            pncc.write_ppm(image, path)
        if not os.path.exists(path):
            self.skipTest("toy_head.ppm is written by running the tests with PYHEAD_REGENERATE_FIXTURES=1")
        with open(path, 'rb') as f:
            self.assertEqual(pncc.ppm_bytes(image), f.read())

    def test_triangle_order(self):
        params = sample_params(ASSETS, 4, scale=10.0)
        image = pncc.render_pncc(ASSETS, params, 48)['image [-]']
        permutation = np.random.RandomState(0).permutation(ASSETS.triangles.shape[0])
        document = json.loads(jsonio.dumps(ASSETS.to_dict()))
        document['triangles'] = ASSETS.triangles[permutation].tolist()
        shuffled = ModelAssets.from_dict(document)
        self.assertEqual(pncc.render_pncc(shuffled, params, 48)['image [-]'], image)

    def test_fail_with_error(self):
        self.assertRaises(ValidationError, pncc.render_pncc, ASSETS, sample_params(ASSETS, 3), 64, 0.0)


class Test_ppm(unittest.TestCase):

    def test_header(self):
        image = pncc.RasterImage(1, 1, [[[1, 2, 3]]])
        data = pncc.ppm_bytes(image)
        self.assertEqual(len(data), 14)
        self.assertEqual(data, b'P6\n1 1\n255\n\x01\x02\x03')

    def test_read_write(self):
        path = os.path.join(tempfile.mkdtemp(), 'image.ppm')
        image = pncc.RasterImage(3, 2, np.arange(18).reshape(2, 3, 3))
        pncc.write_ppm(image, path)
        self.assertEqual(pncc.read_ppm(path), image)
        self.assertEqual(pncc.read_ppm(os.path.join(FIXTURES, 'two_triangles.ppm')).pixel(3, 0), (0, 255, 0))

    def test_fail_with_error(self):
        path = os.path.join(tempfile.mkdtemp(), 'image.ppm')
        with open(path, 'wb') as f:
            f.write(b'P6\n2 2\n255\n\x00\x00\x00')
        self.assertRaises(ValidationError, pncc.read_ppm, path)
        with open(path, 'wb') as f:
            f.write(b'P3\n1 1\n255\n0 0 0')
        self.assertRaises(ValidationError, pncc.read_ppm, path)
        self.assertRaises(ValidationError, pncc.RasterImage, 0, 1)
