#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import re
import inspect
import logging
from copy import copy
from functools import wraps, lru_cache

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general.exceptions import ValidationError

logger = logging.getLogger(__name__)

# Keyword arguments consumed by the decorator and never forwarded to the decorated function
CONTROL_KWARGS = ('validate', 'fail_silently', 'customvalidation', 'customerroroutput')


def validate_float(var_name, value, min_value=None, max_value=None, min_exclusive=False):
    """
    Validates whether a variable can be used as a floating point number and whether it is within specified bounds.
    If a value equals one of the bounds, the validation passes unless ``min_exclusive`` is set.
    """
    if isinstance(value, (bool, np.bool_)):
        raise ValidationError("%s (%s) is a boolean, not a floating point number" % (var_name, str(value)))
    try:
        value = float(value)
    except Exception as err:
        raise ValidationError("%s (%s) is not a floating point number - %s" % (var_name, str(value), str(err)))

    if min_value is not None:
        if min_exclusive and value <= min_value:
            raise ValidationError("%s (%s) must be greater than %s" % (var_name, str(value), str(min_value)))
        elif value < min_value:
            raise ValidationError("%s (%s) cannot be smaller than %s" % (var_name, str(value), str(min_value)))

    if max_value is not None and value > max_value:
        raise ValidationError("%s (%s) cannot be greater than %s" % (var_name, str(value), str(max_value)))

    return True


def validate_integer(var_name, value, min_value=None, max_value=None):
    """
    Validates whether a variable is an integral number and whether it is within specified bounds
    """
    try:
        if isinstance(value, (bool, np.bool_)) or int(value) != value:
            raise TypeError("converted integer %s differs from %s" % (str(int(value)), str(value)))
    except Exception as err:
        raise ValidationError("%s (%s) is not an integer number - %s" % (var_name, str(value), str(err)))

    if min_value is not None and value < min_value:
        raise ValidationError("%s (%s) cannot be smaller than %s" % (var_name, str(value), str(min_value)))

    if max_value is not None and value > max_value:
        raise ValidationError("%s (%s) cannot be greater than %s" % (var_name, str(value), str(max_value)))

    return True


def validate_boolean(var_name, value):
    if not isinstance(value, (bool, np.bool_)):
        raise ValidationError("%s (%s) is not a boolean" % (var_name, str(value)))
    return True


def validate_string(var_name, value, options=None, regex=None):
    """
    Validates whether a variable is a string.
    The string can optionally be checked against a list of allowed options or a regex pattern.
    """
    if not isinstance(value, str):
        raise ValidationError("%s (%s) is not a string" % (var_name, str(value)))

    if options is not None and value not in options:
        raise ValidationError("%s (%s) not included in list of allowable strings (%s)" % (
            var_name, value, str(options)))

    if regex is not None and not re.match(regex, value):
        raise ValidationError("%s (%s) does not match the required string format (%s)" % (var_name, value, regex))

    return True


def validate_list(var_name, value, elementtype=None, order=None, unique=None, empty_allowed=None):
    """
    Validates a list or tuple. Elements can be checked for their type, ascending or descending order,
    uniqueness and the list can be required to be non-empty.
    """
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if not isinstance(value, (list, tuple)):
        raise ValidationError("%s (%s) is not a list or tuple" % (var_name, str(value)))
    value = list(value)

    element_validators = {
        'float': validate_float,
        'int': validate_integer,
        'string': validate_string,
        'boolean': validate_boolean,
    }
    if elementtype is not None:
        if elementtype not in element_validators:
            raise ValidationError("Unspecified elementtype %s for %s" % (elementtype, var_name))
        for el in value:
            try:
                element_validators[elementtype](var_name, el)
            except ValidationError:
                raise ValidationError("Invalid element type for %s in %s, %s required" % (
                    str(el), var_name, elementtype))

    if order == 'ascending':
        if any(np.isnan(v) for v in value if isinstance(v, float)) or sorted(value) != value:
            raise ValidationError("List %s (%s) is not ascending" % (var_name, str(value)))
    elif order == 'descending':
        if any(np.isnan(v) for v in value if isinstance(v, float)) or sorted(value, reverse=True) != value:
            raise ValidationError("List %s (%s) is not descending" % (var_name, str(value)))
    elif order is not None:
        raise ValidationError("Incorrect string for list order")

    if unique and len(value) > len(set(value)):
        raise ValidationError("%s (%s) contains non-unique elements" % (var_name, str(value)))

    if empty_allowed is False and len(value) == 0:
        raise ValidationError("%s cannot be an empty list" % var_name)

    return True


def validate_array(var_name, value, shape=None, finite=True, min_value=None, max_value=None):
    """
    Validates whether a variable can be converted to a floating point numpy array.
    The shape pattern uses ``None`` for dimensions of arbitrary length, e.g. ``(None, 3)`` for a point cloud.
    """
    try:
        array = np.asarray(value, dtype=float)
    except Exception as err:
        raise ValidationError("%s cannot be converted to a numerical array - %s" % (var_name, str(err)))

    if shape is not None:
        if array.ndim != len(shape) or any(
                expected is not None and actual != expected for actual, expected in zip(array.shape, shape)):
            raise ValidationError("%s has shape %s, expected %s" % (
                var_name, str(array.shape), str(tuple('n' if s is None else s for s in shape))))

    if finite and not np.all(np.isfinite(array)):
        raise ValidationError("%s contains non-finite entries" % var_name)

    if min_value is not None and array.size and array.min() < min_value:
        raise ValidationError("%s has entries smaller than %s" % (var_name, str(min_value)))

    if max_value is not None and array.size and array.max() > max_value:
        raise ValidationError("%s has entries greater than %s" % (var_name, str(max_value)))

    return True


def validate_instance(var_name, value, cls):
    if not isinstance(value, cls):
        raise ValidationError("%s (%s) is not an instance of %s" % (var_name, type(value).__name__, cls.__name__))
    return True


def _check(var_name, spec):
    """
    Dispatches one entry of a validation data structure to the validation routine for its type
    """
    value = spec['value']
    vartype = spec['type']
    if vartype == 'float':
        validate_float(var_name, value, spec.get('min_value'), spec.get('max_value'),
                       spec.get('min_exclusive', False))
    elif vartype == 'int':
        validate_integer(var_name, value, spec.get('min_value'), spec.get('max_value'))
    elif vartype == 'string':
        validate_string(var_name, value, options=spec.get('options'), regex=spec.get('regex'))
    elif vartype == 'bool':
        validate_boolean(var_name, value)
    elif vartype == 'list':
        validate_list(var_name, value, spec.get('elementtype'), spec.get('order'), spec.get('unique'),
                      spec.get('empty_allowed'))
    elif vartype == 'array':
        validate_array(var_name, value, shape=spec.get('shape'), finite=spec.get('finite', True),
                       min_value=spec.get('min_value'), max_value=spec.get('max_value'))
    elif vartype == 'instance':
        validate_instance(var_name, value, spec['class'])
    else:
        raise ValidationError("Unknown validation type %s for %s" % (vartype, var_name))


@lru_cache(maxsize=None)
def _signature(method):
    return inspect.signature(method)


def map_args(method, var, *args, **kwargs):
    """
    Constructs a data structure with all parameters, their values and the validation parameters
    which need to be used during validation.

    :param method: The function for which validation will be applied
    :param var: The validation data structure, entered as argument of the function decorator
    :param args: function arguments
    :param kwargs: function keyword arguments, ``<name>__min`` and ``<name>__max`` override the ranges

    :returns: Dictionary which is a copy of the validation data structure with the runtime value of each
        parameter under the key ``'value'``. Parameters without a value at runtime are left out.
    """
    overrides = {}
    call_kwargs = {}
    for key, value in kwargs.items():
        if key.endswith('__min') or key.endswith('__max'):
            overrides[key] = value
        elif key not in CONTROL_KWARGS:
            call_kwargs[key] = value

    try:
        bound = _signature(method).bind_partial(*args, **call_kwargs)
    except TypeError as err:
        raise ValidationError("Error during mapping of validation parameters to function parameters - %s" % str(err))
    bound.apply_defaults()

    var_validation = {}
    for name, spec in var.items():
        if name in bound.arguments:
            var_validation[name] = dict(spec, value=bound.arguments[name])

    for key, value in overrides.items():
        name, bound_name = key[:-5], ('min_value' if key.endswith('__min') else 'max_value')
        if name not in var:
            raise ValidationError("Range override %s does not refer to a validated parameter" % key)
        if name in var_validation:
            var_validation[name][bound_name] = value

    return var_validation


def split_kwargs(kwargs):
    """
    Removes the range overrides and decorator controls from the keyword arguments
    """
    return {key: value for key, value in kwargs.items()
            if key not in CONTROL_KWARGS and not key.endswith('__min') and not key.endswith('__max')}


class Validator(object):
    """
    Decorator for calculation functions with the following features

        - Validation of the arguments against a validation data structure (skipped with ``validate=False``)
        - Automatic handling of function output upon errors (``fail_silently=True`` returns the error output)
        - Possibility to override the default validation dictionary with ``customvalidation`` and the error
          output with ``customerroroutput``

    Validation errors are always raised. ``fail_silently`` only applies to errors raised by the calculation itself.
    """

    def __init__(self, validationspec, outputonerrorspec):
        self.validationspec = validationspec
        self.outputonerror = outputonerrorspec

    def __call__(self, fn):
        @wraps(fn)
        def decorated(*args, **kwargs):
            validate = kwargs.get('validate', True)
            fail_silently = kwargs.get('fail_silently', True)
            validation_params = kwargs.get('customvalidation', self.validationspec)
            output_for_errors = kwargs.get('customerroroutput', self.outputonerror)

            if validate or validate is None:
                var_validation = map_args(fn, validation_params, *args, **kwargs)
                for name, spec in var_validation.items():
                    _check(name, spec)

            try:
                return fn(*args, **split_kwargs(kwargs))
            except Exception as err:
                if fail_silently or fail_silently is None:
                    logger.debug("%s failed silently - %s" % (fn.__name__, str(err)))
                    return copy(output_for_errors)
                else:
                    raise

        return decorated
