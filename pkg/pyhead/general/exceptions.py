#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'


class ValidationError(ValueError):
    """
    An argument, a document or a domain object violates one of its invariants.
    The message names the offending field.
    """
    pass


class SingularInputError(ValueError):
    """
    The input does not define a unique result (e.g. a degenerate 6D rotation vector)
    """
    pass


class DegenerateGeometryError(ValueError):
    """
    A point set or box without extent was supplied where a positive extent is required
    """
    pass


class IncompleteRecordError(ValueError):

    def __init__(self, field, image_id=None):
        self.field = field
        self.image_id = image_id
        super(IncompleteRecordError, self).__init__(
            "Record %s lacks field '%s' and no detector is available" % (image_id, field))


class DivergedError(RuntimeError):
    """
    The fitting objective became non-finite. The partial trace is available as ``trace``.
    """

    def __init__(self, message, trace=None):
        self.trace = trace
        super(DivergedError, self).__init__(message)


class UsageError(Exception):
    pass
