#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

import unittest
import numpy as np
from pyhead.general.exceptions import ValidationError
from pyhead.general.validation import Validator, validate_float, validate_integer, validate_string, \
    validate_boolean, validate_list, validate_array, validate_instance, map_args, split_kwargs

VALIDATION_DATA = {
    'a': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0},
    'b': {'type': 'string', 'options': ('yaw', 'pitch'), 'regex': None},
    'c': {'type': 'float', 'min_value': None, 'max_value': None},
    'd': {'type': 'list', 'elementtype': 'float', 'order': 'ascending', 'unique': True, 'empty_allowed': True}
}

ERROR_RETURN = {
    'result [-]': np.nan,
}


@Validator(VALIDATION_DATA, ERROR_RETURN)
def example_function(a, b, c=2.0, d=(1.0, 2.0)):
    if c == 0.0:
        raise ZeroDivisionError("c cannot be zero")
    return {
        'result [-]': a / c,
    }


class Test_validate_float(unittest.TestCase):

    def test_nonfloat(self):
        self.assertRaises(ValidationError, validate_float, "example_string", "abcd")
        self.assertRaises(ValidationError, validate_float, "example_list", [1.0, 2.0])
        self.assertRaises(ValidationError, validate_float, "example_bool", True)

    def test_nan(self):
        self.assertEqual(validate_float("example_float", np.nan), True)

    def test_float(self):
        self.assertEqual(validate_float("example_float", 1.1), True)
        self.assertEqual(validate_float("example_numpy", np.float64(1.1)), True)

    def test_range(self):
        self.assertRaises(ValueError, validate_float, "example_float", 10.0, min_value=1.0, max_value=5.0)
        self.assertRaises(ValueError, validate_float, "example_float", 0.0, min_value=1.0, max_value=5.0)
        self.assertEqual(validate_float("example_float", 1.0, min_value=1.0), True)

    def test_min_exclusive(self):
        self.assertRaises(ValidationError, validate_float, "example_float", 0.0, min_value=0.0, min_exclusive=True)
        self.assertEqual(validate_float("example_float", 1e-9, min_value=0.0, min_exclusive=True), True)


class Test_validate_integer(unittest.TestCase):

    def test_noninteger(self):
        self.assertRaises(ValidationError, validate_integer, "example_string", "abcd")
        self.assertRaises(ValidationError, validate_integer, "example_nonint", 1.2)
        self.assertRaises(ValidationError, validate_integer, "example_bool", False)

    def test_integer(self):
        self.assertEqual(validate_integer("example_int", 1), True)
        self.assertEqual(validate_integer("example_numpy", np.int64(3)), True)

    def test_range(self):
        self.assertRaises(ValueError, validate_integer, "example_integer", 10, min_value=1, max_value=5)
        self.assertRaises(ValueError, validate_integer, "example_integer", 0, min_value=1, max_value=5)


class Test_validate_boolean(unittest.TestCase):

    def test_boolean(self):
        self.assertEqual(validate_boolean("example_boolean", True), True)
        self.assertRaises(ValidationError, validate_boolean, "example_int", 1)


class Test_validate_string(unittest.TestCase):

    def test_string(self):
        self.assertEqual(validate_string("example_string", "head"), True)
        self.assertRaises(ValidationError, validate_string, "example_int", 10)

    def test_options(self):
        self.assertRaises(ValueError, validate_string, "example_string", "roll", options=('yaw', 'pitch'))
        self.assertEqual(validate_string("example_string", 'yaw', options=['yaw', 'pitch']), True)

    def test_regex(self):
        self.assertEqual(validate_string("example_string", "img_001", regex="^img_[0-9]+$"), True)
        self.assertRaises(ValueError, validate_string, "example_string", "image", regex="^img_[0-9]+$")


class Test_validate_list(unittest.TestCase):

    def test_nonlist(self):
        self.assertRaises(ValidationError, validate_list, "example_int", 10)
        self.assertRaises(ValidationError, validate_list, "example_string", "abc")

    def test_list(self):
        self.assertEqual(validate_list("example_list", [1.0, 2.0, 3.0]), True)
        self.assertEqual(validate_list("example_tuple", (1.0, 2.0, 3.0)), True)
        self.assertEqual(validate_list("example_array", np.array([1.0, 2.0])), True)

    def test_elementtype(self):
        self.assertEqual(validate_list("example_list", [8, 16, 32], elementtype="int"), True)
        self.assertRaises(ValueError, validate_list, "example_list", [1.0, 2.2], elementtype="int")
        self.assertRaises(ValueError, validate_list, "example_list", [1.0, "a"], elementtype="float")

    def test_order(self):
        self.assertEqual(validate_list("example_list", [1.0, 2.0, 3.0], order="ascending"), True)
        self.assertRaises(ValueError, validate_list, "example_list", [1.0, 3.0, 2.0], order="ascending")
        self.assertRaises(ValueError, validate_list, "example_list", [np.nan, 3.0, 2.0], order="ascending")
        self.assertEqual(validate_list("example_list", [3.0, 2.0, 1.0], order="descending"), True)
        self.assertRaises(ValueError, validate_list, "example_list", [2.0, 3.0, 1.0], order="descending")

    def test_unique(self):
        self.assertRaises(ValueError, validate_list, "example_list", [8, 8, 16], unique=True)

    def test_empty(self):
        self.assertRaises(ValueError, validate_list, "example_list", [], empty_allowed=False)
        self.assertEqual(validate_list("example_list", [], empty_allowed=True), True)


class Test_validate_array(unittest.TestCase):

    def test_shape(self):
        self.assertEqual(validate_array("points", np.zeros((5, 3)), shape=(None, 3)), True)
        self.assertRaises(ValidationError, validate_array, "points", np.zeros((5, 2)), shape=(None, 3))
        self.assertRaises(ValidationError, validate_array, "points", np.zeros(3), shape=(None, 3))

    def test_finite(self):
        self.assertRaises(ValidationError, validate_array, "points", [1.0, np.inf])
        self.assertEqual(validate_array("points", [1.0, np.nan], finite=False), True)

    def test_nonnumeric(self):
        self.assertRaises(ValidationError, validate_array, "points", ["a", "b"])

    def test_range(self):
        self.assertRaises(ValidationError, validate_array, "colors", [0.5, 1.5], min_value=0.0, max_value=1.0)


class Test_validate_instance(unittest.TestCase):

    def test_instance(self):
        self.assertEqual(validate_instance("value", 1.0, float), True)
        self.assertRaises(ValidationError, validate_instance, "value", "1.0", float)


class Test_map_args(unittest.TestCase):

    def test_defaults(self):
        result = map_args(example_function, VALIDATION_DATA, 0.5, 'yaw')
        self.assertEqual(result['a']['value'], 0.5)
        self.assertEqual(result['c']['value'], 2.0)
        self.assertEqual(result['d']['value'], (1.0, 2.0))

    def test_overrides(self):
        result = map_args(example_function, VALIDATION_DATA, 2.0, 'yaw', a__max=5.0, fail_silently=False)
        self.assertEqual(result['a']['max_value'], 5.0)
        self.assertEqual(VALIDATION_DATA['a']['max_value'], 1.0)

    def test_unknown_override(self):
        self.assertRaises(ValidationError, map_args, example_function, VALIDATION_DATA, 0.5, 'yaw', e__min=1.0)

    def test_split_kwargs(self):
        self.assertEqual(split_kwargs({'a': 1.0, 'a__min': 0.0, 'validate': False}), {'a': 1.0})


class Test_Validator(unittest.TestCase):

    def test_values(self):
        self.assertEqual(example_function(0.5, 'yaw')['result [-]'], 0.25)
        self.assertEqual(example_function(a=0.5, b='pitch', c=0.5)['result [-]'], 1.0)

    def test_validation_error(self):
        self.assertRaises(ValidationError, example_function, 1.5, 'yaw')
        self.assertRaises(ValidationError, example_function, 0.5, 'roll')
        self.assertRaises(ValidationError, example_function, 0.5, 'yaw', d=[2.0, 1.0])
        # Validation errors are raised even when failing silently
        self.assertRaises(ValidationError, example_function, 1.5, 'yaw', fail_silently=True)

    def test_range_override(self):
        self.assertEqual(example_function(1.5, 'yaw', a__max=2.0)['result [-]'], 0.75)

    def test_skip_validation(self):
        self.assertEqual(example_function(1.5, 'roll', validate=False)['result [-]'], 0.75)

    def test_fail_silently(self):
        self.assertTrue(np.isnan(example_function(0.5, 'yaw', c=0.0)['result [-]']))

    def test_fail_with_error(self):
        self.assertRaises(ZeroDivisionError, example_function, 0.5, 'yaw', c=0.0, fail_silently=False)

    def test_custom_error_output(self):
        self.assertEqual(example_function(0.5, 'yaw', c=0.0, customerroroutput={'result [-]': -1.0}),
                         {'result [-]': -1.0})

    def test_error_output_is_copied(self):
        result = example_function(0.5, 'yaw', c=0.0)
        result['result [-]'] = 3.0
        self.assertTrue(np.isnan(ERROR_RETURN['result [-]']))
