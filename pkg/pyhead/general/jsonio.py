#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import json
import math
import logging
import numbers

# 3rd party packages
import numpy as np
from voluptuous import Schema, Invalid, All, Length

# Project imports
from pyhead.general.exceptions import ValidationError

logger = logging.getLogger(__name__)


def finite_number(value):
    """
    voluptuous validator accepting JSON numbers (not booleans) with a finite value
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise Invalid("expected a number")
    if not math.isfinite(value):
        raise Invalid("expected a finite number")
    return float(value)


def integer(value):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise Invalid("expected an integer")
    return int(value)


def vector(length=None):
    """
    Schema for a flat list of finite numbers, optionally of fixed length
    """
    if length is None:
        return [finite_number]
    return All([finite_number], Length(min=length, max=length))


def matrix(columns):
    """
    Schema for a list of rows with a fixed number of finite numbers each (e.g. n x 3 vertices)
    """
    return [vector(columns)]


BOX_SCHEMA = vector(4)


def check(schema, document, name='document'):
    """
    Validates a decoded JSON document against a voluptuous schema and returns the validated copy.
    voluptuous errors are translated to :class:`ValidationError` naming the offending path.
    """
    if not isinstance(schema, Schema):
        schema = Schema(schema)
    try:
        return schema(document)
    except Invalid as err:
        raise ValidationError("Invalid %s: %s" % (name, str(err)))


def to_jsonable(obj):
    """
    Converts numpy arrays and scalars nested in dictionaries and lists to plain Python objects.
    Python floats are serialised with their shortest round-trip representation by the json module.
    """
    if isinstance(obj, dict):
        return {key: to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj, indent=2):
    return json.dumps(to_jsonable(obj), indent=indent, allow_nan=False)


def dump_json(obj, path, indent=2):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(dumps(obj, indent=indent))
        f.write('\n')


def load_json(path, schema=None, name=None):
    """
    Reads a UTF-8 JSON document and validates it when a schema is given.

    :raises ValidationError: when the file is not valid JSON or does not match the schema
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except json.JSONDecodeError as err:
        raise ValidationError("%s is not a valid JSON document - %s" % (path, str(err)))
    if schema is None:
        return document
    return check(schema, document, name=name or str(path))


def jsonl_line(obj):
    return json.dumps(to_jsonable(obj), separators=(', ', ': '), allow_nan=False)


def iter_jsonl(lines, schema=None, strict=False):
    """
    Lenient JSONL reader. Yields ``(line_number, record, error)`` for each non-blank line, with line numbers
    starting at 1. When a line cannot be parsed or does not match the schema, ``record`` is None and
    ``error`` holds the message, unless ``strict`` is set in which case the error is raised.
    """
    if schema is not None and not isinstance(schema, Schema):
        schema = Schema(schema)
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if schema is not None:
                record = check(schema, record, name='record on line %i' % line_number)
        except (json.JSONDecodeError, ValidationError) as err:
            message = str(err)
            if strict:
                raise ValidationError("Line %i: %s" % (line_number, message))
            logger.warning("Skipping line %i - %s" % (line_number, message))
            yield line_number, None, message
            continue
        yield line_number, record, None


def write_jsonl(records, path):
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(jsonl_line(record))
            f.write('\n')
