#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import logging
import threading
from collections import OrderedDict, Counter
from concurrent.futures import ThreadPoolExecutor

# 3rd party packages
from tqdm import tqdm
from voluptuous import Schema, Required, Optional, All, Range, ALLOW_EXTRA

# Project imports
from pyhead.general import jsonio
from pyhead.general.exceptions import ValidationError, IncompleteRecordError
from pyhead.general.geometry.boxes import BBox

logger = logging.getLogger(__name__)

BOX_FIELDS = ('heads', 'heads_flipped', 'heads_left', 'heads_right', 'faces')

NO_HEADS = 'NoHeads'
FLIP_MISMATCH = 'FlipMismatch'
FACE_HEAD_OVERLAP = 'FaceHeadOverlap'
HALF_SPLIT_MISMATCH = 'HalfSplitMismatch'

QA_RECORD_SCHEMA = Schema({
    Required('image_id'): str,
    Required('width'): All(jsonio.integer, Range(min=1)),
    Required('height'): All(jsonio.integer, Range(min=1)),
    Optional('heads'): [jsonio.BOX_SCHEMA],
    Optional('heads_flipped'): [jsonio.BOX_SCHEMA],
    Optional('heads_left'): [jsonio.BOX_SCHEMA],
    Optional('heads_right'): [jsonio.BOX_SCHEMA],
    Optional('faces'): [jsonio.BOX_SCHEMA],
}, extra=ALLOW_EXTRA)


def flip_boxes(boxes, width):
    """
    Boxes mirrored about the vertical centre line of an image of the given width
    """
    return [box.flip_horizontal(width) for box in boxes]


def split_by_center(boxes, width):
    """
    Assigns boxes to the left or right half of an image by the side of their centre; a centre on the split line
    counts for the right half. Right-half boxes are shifted into the coordinates of the right crop.

    :returns: Tuple (left boxes, right boxes)
    """
    half = 0.5 * width
    left, right = [], []
    for box in boxes:
        if box.center[0] < half:
            left.append(box)
        else:
            right.append(BBox(box.x1 - half, box.y1, box.x2 - half, box.y2))
    return left, right


class ImageQARecord(object):
    """
    Per-image detection evidence used by the filtering rules. Box lists of fields absent from the record are
    None and are filled by a detector on demand. Boxes are clamped to the image.
    """

    def __init__(self, image_id, width, height, heads=None, heads_flipped=None, heads_left=None,
                 heads_right=None, faces=None, document=None):
        if width <= 0 or height <= 0:
            raise ValidationError("Image %s must have a positive width and height" % image_id)
        self.image_id = image_id
        self.width = width
        self.height = height
        self.heads = self._boxes(heads)
        self.heads_flipped = self._boxes(heads_flipped)
        self.heads_left = self._boxes(heads_left)
        self.heads_right = self._boxes(heads_right)
        self.faces = self._boxes(faces)
        self.document = document

    def _boxes(self, boxes):
        if boxes is None:
            return None
        return [(box if isinstance(box, BBox) else BBox.from_list(box)).clamp(self.width, self.height)
                for box in boxes]

    @classmethod
    def from_dict(cls, document):
        checked = jsonio.check(QA_RECORD_SCHEMA, document, name='QA record')
        fields = {field: checked.get(field) for field in BOX_FIELDS}
        return cls(checked['image_id'], checked['width'], checked['height'], document=document, **fields)

    def require(self, field, detector=None):
        """
        Box list of a field, obtained from the detector when the record does not contain it

        :raises IncompleteRecordError: when the field is absent and no detector is given
        """
        boxes = getattr(self, field)
        if boxes is None:
            if detector is None:
                raise IncompleteRecordError(field, self.image_id)
            logger.debug("Running detector on %s for %s" % (self.image_id, field))
            boxes = self._boxes(detector(self.image_id, field))
            setattr(self, field, boxes)
        return boxes

    def to_dict(self):
        if self.document is not None:
            return self.document
        document = OrderedDict([('image_id', self.image_id), ('width', self.width), ('height', self.height)])
        for field in BOX_FIELDS:
            boxes = getattr(self, field)
            if boxes is not None:
                document[field] = [box.as_list() for box in boxes]
        return document


class QaDecision(object):
    """
    Verdict of a rule or of the whole pipeline for one image
    """

    def __init__(self, keep, failed_rule=None, detail=''):
        if keep == (failed_rule is not None):
            raise ValidationError("A kept image has no failed rule and a dropped image has one")
        self.keep = keep
        self.failed_rule = failed_rule
        self.detail = detail

    @classmethod
    def passed(cls):
        return cls(True)

    @classmethod
    def dropped(cls, rule, detail):
        return cls(False, rule, detail)

    def __eq__(self, other):
        return isinstance(other, QaDecision) and (self.keep, self.failed_rule) == (other.keep, other.failed_rule)

    def __repr__(self):
        return "QaDecision(keep=%r, failed_rule=%r)" % (self.keep, self.failed_rule)


def rule_name(rule):
    return getattr(rule, 'rule_name', rule.__name__)


def rule_no_heads(record, detector=None):
    """
    Drops images in which no head is detected
    """
    heads = record.require('heads', detector)
    if not heads:
        return QaDecision.dropped(NO_HEADS, "no heads detected")
    return QaDecision.passed()


rule_no_heads.rule_name = NO_HEADS


def rule_flip_consistency(record, detector=None):
    """
    Drops images where the number of heads detected on the horizontally flipped image differs. Only the counts
    are compared.
    """
    heads = record.require('heads', detector)
    flipped = record.require('heads_flipped', detector)
    if len(heads) != len(flipped):
        return QaDecision.dropped(FLIP_MISMATCH, "%i heads, %i on the flipped image" % (len(heads), len(flipped)))
    return QaDecision.passed()


rule_flip_consistency.rule_name = FLIP_MISMATCH


def rule_face_head_overlap(record, detector=None):
    """
    Drops images with a detected face that has no overlap (zero intersection area) with every head box. Images
    without faces pass.
    """
    faces = record.require('faces', detector)
    if not faces:
        return QaDecision.passed()
    heads = record.require('heads', detector)
    for index, face in enumerate(faces):
        if all(face.intersection_area(head) <= 0.0 for head in heads):
            return QaDecision.dropped(FACE_HEAD_OVERLAP, "face %i overlaps no head" % index)
    return QaDecision.passed()


rule_face_head_overlap.rule_name = FACE_HEAD_OVERLAP


def rule_half_split(record, detector=None):
    """
    Drops images where the heads detected on the left and right halves do not add up to the heads detected on
    the full image
    """
    heads = record.require('heads', detector)
    left = record.require('heads_left', detector)
    right = record.require('heads_right', detector)
    if len(left) + len(right) != len(heads):
        return QaDecision.dropped(HALF_SPLIT_MISMATCH, "%i + %i heads on the halves, %i on the image" % (
            len(left), len(right), len(heads)))
    return QaDecision.passed()


rule_half_split.rule_name = HALF_SPLIT_MISMATCH

DEFAULT_RULES = (rule_no_heads, rule_flip_consistency, rule_face_head_overlap, rule_half_split)


def apply_rules(record, rules=DEFAULT_RULES, detector=None):
    """
    Applies the rules in order and stops at the first failing rule
    """
    for rule in rules:
        decision = rule(record, detector)
        if not decision.keep:
            return decision
    return QaDecision.passed()


class FixtureDetector(object):
    """
    Detector backed by fixture records. Fields missing from a fixture are derived from its ``heads``: flipped
    boxes by mirroring and half-image boxes by the side of their centre. Missing faces are an empty list.
    Invocations are counted per field and per image.
    """

    def __init__(self, mapping):
        self.mapping = {image_id: ImageQARecord.from_dict(document) if isinstance(document, dict) else document
                        for image_id, document in mapping.items()}
        self.calls = Counter()
        self.calls_per_image = Counter()
        self._lock = threading.Lock()

    def __call__(self, image_id, field):
        if field not in BOX_FIELDS:
            raise ValidationError("Unknown detector field %s" % field)
        with self._lock:
            self.calls[field] += 1
            self.calls_per_image[image_id] += 1
        if image_id not in self.mapping:
            raise ValidationError("Image %s is not part of the fixture" % image_id)
        fixture = self.mapping[image_id]
        boxes = getattr(fixture, field)
        if boxes is not None:
            return list(boxes)
        heads = fixture.heads or []
        if field == 'heads_flipped':
            return flip_boxes(heads, fixture.width)
        if field == 'heads_left':
            return split_by_center(heads, fixture.width)[0]
        if field == 'heads_right':
            return split_by_center(heads, fixture.width)[1]
        return []

    @property
    def total_calls(self):
        return sum(self.calls.values())


class QaReport(object):
    """
    Audit report of a filtering run
    """

    def __init__(self, rule_names):
        self.total = 0
        self.kept = 0
        self.kept_heads = 0
        self.dropped_by_rule = OrderedDict((name, 0) for name in rule_names)
        self.errors = []

    @property
    def keep_rate(self):
        return self.kept / float(self.total) if self.total else 0.0

    def add(self, record, decision):
        self.total += 1
        if decision.keep:
            self.kept += 1
            self.kept_heads += len(record.heads or [])
        else:
            self.dropped_by_rule[decision.failed_rule] = self.dropped_by_rule.get(decision.failed_rule, 0) + 1

    def add_error(self, line_number, message):
        self.errors.append(OrderedDict([('line', line_number), ('message', message)]))

    def to_dict(self):
        return OrderedDict([
            ('total', self.total),
            ('kept', self.kept),
            ('kept_heads', self.kept_heads),
            ('keep_rate', self.keep_rate),
            ('dropped_by_rule', self.dropped_by_rule),
            ('errors', self.errors),
        ])


def parse_records(lines, strict=False, report=None):
    """
    Parses QA JSONL lines into ``(line_number, record)`` pairs. Unparseable lines are added to the report
    errors, or raised as :class:`ValidationError` in strict mode.
    """
    records = []
    for line_number, document, error in jsonio.iter_jsonl(lines, strict=strict):
        if error is None:
            try:
                records.append((line_number, ImageQARecord.from_dict(document)))
                continue
            except ValidationError as err:
                if strict:
                    raise ValidationError("Line %i: %s" % (line_number, str(err)))
                logger.warning("Skipping line %i - %s" % (line_number, str(err)))
                error = str(err)
        if report is not None:
            report.add_error(line_number, error)
    return records


def run_pipeline(lines, rules=DEFAULT_RULES, detector=None, strict=False, threads=1, progress=False):
    """
    Streams QA records through the filtering rules. The default rules run in the order: no heads, flip
    consistency, face-head overlap and half split, and evaluation of a record stops at the first failing rule.
    Records are independent and may be evaluated on ``threads`` worker threads; output and report follow the
    input order. Fields missing from a record are requested from ``detector``.

    :param lines: Iterable of JSONL lines
    :param rules: Ordered rules, callables ``rule(record, detector) -> QaDecision`` (optional)
    :param detector: Callable ``detector(image_id, field) -> list of BBox`` (optional, default= None)
    :param strict: Abort on unparseable lines instead of recording them (optional, default= False)
    :param threads: Number of worker threads (optional, default= 1)
    :param progress: Show a progress bar on stderr (optional, default= False)

    :returns: Dictionary with the following keys:

        - 'kept [-]': Original documents of the kept records, in input order
        - 'report [-]': :class:`QaReport`
        - 'decisions [-]': List of ``(line_number, image_id, QaDecision)``

    :raises IncompleteRecordError: when a rule needs a missing field and no detector is given
    """
    rules = list(rules)
    report = QaReport([rule_name(rule) for rule in rules])
    records = parse_records(lines, strict=strict, report=report)

    def evaluate(item):
        return apply_rules(item[1], rules, detector)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as executor:
        decisions = list(tqdm(executor.map(evaluate, records), total=len(records), disable=not progress,
                              desc='filter', unit='image'))

    kept = []
    for (line_number, record), decision in zip(records, decisions):
        report.add(record, decision)
        if decision.keep:
            kept.append(record.to_dict())

    logger.info("Kept %i of %i images (%i unparseable lines)" % (report.kept, report.total, len(report.errors)))
    return {
        'kept [-]': kept,
        'report [-]': report,
        'decisions [-]': [(line_number, record.image_id, decision)
                          for (line_number, record), decision in zip(records, decisions)],
    }
