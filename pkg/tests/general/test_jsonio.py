#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

import os
import json
import tempfile
import unittest
from collections import OrderedDict

import numpy as np
from voluptuous import Schema, Required

from pyhead.general import jsonio
from pyhead.general.exceptions import ValidationError

RECORD_SCHEMA = Schema({
    Required('image_id'): str,
    Required('bbox'): jsonio.BOX_SCHEMA,
})


class Test_schemas(unittest.TestCase):

    def test_finite_number(self):
        self.assertEqual(jsonio.check(jsonio.vector(2), [1, 2.5]), [1.0, 2.5])
        self.assertRaises(ValidationError, jsonio.check, jsonio.vector(2), [1.0, float('nan')])
        self.assertRaises(ValidationError, jsonio.check, jsonio.vector(2), [True, 1.0])
        self.assertRaises(ValidationError, jsonio.check, jsonio.vector(2), [1.0, "2"])

    def test_lengths(self):
        self.assertRaises(ValidationError, jsonio.check, jsonio.BOX_SCHEMA, [0.0, 0.0, 1.0])
        self.assertEqual(len(jsonio.check(jsonio.matrix(3), [[0, 0, 0], [1, 1, 1]])), 2)
        self.assertRaises(ValidationError, jsonio.check, jsonio.matrix(3), [[0, 0]])

    def test_error_names_document(self):
        with self.assertRaises(ValidationError) as context:
            jsonio.check(RECORD_SCHEMA, {'image_id': 'a'}, name='prediction')
        self.assertIn('prediction', str(context.exception))
        self.assertIn('bbox', str(context.exception))


class Test_to_jsonable(unittest.TestCase):

    def test_values(self):
        converted = jsonio.to_jsonable(OrderedDict([
            ('array', np.arange(3.0)), ('int', np.int64(4)), ('flag', np.bool_(True)), ('nested', [(1, 2)])]))
        self.assertEqual(converted, {'array': [0.0, 1.0, 2.0], 'int': 4, 'flag': True, 'nested': [[1, 2]]})
        self.assertEqual(list(converted.keys()), ['array', 'int', 'flag', 'nested'])

    def test_round_trip_precision(self):
        value = 0.1 + 0.2
        self.assertEqual(json.loads(jsonio.dumps({'value': np.float64(value)}))['value'], value)

    def test_nan_rejected(self):
        self.assertRaises(ValueError, jsonio.dumps, {'value': float('nan')})


class Test_files(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def test_dump_and_load(self):
        path = os.path.join(self.directory, 'document.json')
        jsonio.dump_json({'image_id': 'img', 'bbox': np.array([0.0, 1.0, 2.0, 3.0])}, path)
        with open(path, 'r') as f:
            self.assertTrue(f.read().endswith('}\n'))
        self.assertEqual(jsonio.load_json(path, RECORD_SCHEMA)['bbox'], [0.0, 1.0, 2.0, 3.0])

    def test_invalid_json(self):
        path = os.path.join(self.directory, 'broken.json')
        with open(path, 'w') as f:
            f.write('{"image_id": ')
        self.assertRaises(ValidationError, jsonio.load_json, path)

    def test_write_jsonl(self):
        path = os.path.join(self.directory, 'records.jsonl')
        jsonio.write_jsonl([OrderedDict([('image_id', 'a'), ('confidence', 0.5)])], path)
        with open(path, 'r') as f:
            self.assertEqual(f.read(), '{"image_id": "a", "confidence": 0.5}\n')


class Test_iter_jsonl(unittest.TestCase):

    LINES = [
        '{"image_id": "a", "bbox": [0, 0, 1, 1]}\n',
        '\n',
        'not json\n',
        '{"image_id": "b", "bbox": [0, 0, 1]}\n',
        '{"image_id": "c", "bbox": [0, 0, 2, 2]}\n',
    ]

    def test_lenient(self):
        with self.assertLogs('pyhead.general.jsonio', level='WARNING'):
            results = list(jsonio.iter_jsonl(self.LINES, RECORD_SCHEMA))
        self.assertEqual([line_number for line_number, _, _ in results], [1, 3, 4, 5])
        self.assertEqual([record['image_id'] for _, record, _ in results if record is not None], ['a', 'c'])
        self.assertIsNone(results[1][1])
        self.assertIsNotNone(results[1][2])

    def test_strict(self):
        with self.assertRaises(ValidationError) as context:
            list(jsonio.iter_jsonl(self.LINES, RECORD_SCHEMA, strict=True))
        self.assertIn('Line 3', str(context.exception))
