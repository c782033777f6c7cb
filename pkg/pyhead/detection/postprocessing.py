#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import math
import logging
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor

# 3rd party packages
import numpy as np
from scipy.special import expit
from tqdm import tqdm
from voluptuous import Schema, Required, Optional, All, Range, ALLOW_EXTRA

# Project imports
from pyhead.general import jsonio
from pyhead.general.validation import Validator, validate_float
from pyhead.general.exceptions import ValidationError
from pyhead.general.geometry.boxes import BBox, iou
from pyhead.model.assets import HeadParams

logger = logging.getLogger(__name__)

DEFAULT_IMAGE_SIDE = 640
DEFAULT_STRIDES = (8, 16, 32)
# log-size offsets are clamped so that a box spans at most 1e4 strides and at least 1e-4 of a stride
MAX_LOG_SIZE = math.log(1e4)
MIN_BOX_SIDE = 1e-6


class AnchorGrid(object):
    """
    Multi-scale anchor layout of a square image. For every stride the cell centres
    :math:`((x + 0.5) \\cdot s, (y + 0.5) \\cdot s)` of the :math:`\\lceil S / s \\rceil` by
    :math:`\\lceil S / s \\rceil` grid are listed row by row, clamped to :math:`[0, S]`. The strides follow
    each other in the given order.
    """

    def __init__(self, image_side, strides, centers, anchor_strides, grid_sizes):
        self.image_side = image_side
        self.strides = tuple(strides)
        self.centers = centers
        self.anchor_strides = anchor_strides
        self.grid_sizes = tuple(grid_sizes)

    @property
    def count(self):
        return self.centers.shape[0]

    def centers_for_stride(self, stride):
        if stride not in self.strides:
            raise ValidationError("Stride %s is not part of the grid %s" % (str(stride), str(self.strides)))
        return self.centers[self.anchor_strides == stride]

    def __repr__(self):
        return "AnchorGrid(image_side=%i, strides=%s, count=%i)" % (self.image_side, str(self.strides), self.count)


MAKE_ANCHOR_GRID = {
    'image_side': {'type': 'int', 'min_value': 1, 'max_value': None},
    'strides': {'type': 'list', 'elementtype': 'int', 'order': None, 'unique': True, 'empty_allowed': False},
}

MAKE_ANCHOR_GRID_ERRORRETURN = {
    'grid [-]': None,
    'count [-]': np.nan,
}


@Validator(MAKE_ANCHOR_GRID, MAKE_ANCHOR_GRID_ERRORRETURN)
def make_anchor_grid(image_side=DEFAULT_IMAGE_SIDE, strides=DEFAULT_STRIDES):
    """
    Builds the anchor grid for a square input image.

    :param image_side: Side of the (resized) input image (:math:`S`) [:math:`px`] (optional, default= 640)
    :param strides: Strides of the detection scales [:math:`px`] (optional, default= (8, 16, 32))

    .. math::
        n = \\sum_s \\lceil S / s \\rceil^2

    :returns: Dictionary with the following keys:

        - 'grid [-]': :class:`AnchorGrid`
        - 'count [-]': Number of anchors

    """
    strides = [int(stride) for stride in strides]
    if any(stride <= 0 for stride in strides):
        raise ValidationError("Strides must be positive, got %s" % str(strides))
    centers = []
    anchor_strides = []
    grid_sizes = []
    for stride in strides:
        cells = int(math.ceil(image_side / float(stride)))
        coords = np.clip((np.arange(cells) + 0.5) * stride, 0.0, float(image_side))
        centers.append(np.column_stack((np.tile(coords, cells), np.repeat(coords, cells))))
        anchor_strides.append(np.full(cells * cells, stride, dtype=np.int64))
        grid_sizes.append(cells)
    grid = AnchorGrid(image_side, strides, np.concatenate(centers), np.concatenate(anchor_strides), grid_sizes)
    return {
        'grid [-]': grid,
        'count [-]': grid.count,
    }


class RawPrediction(object):
    """
    Network output for one anchor: box offsets ``(dx, dy, dw, dh)`` with the centre offsets in units of the
    stride and the sizes as log-multiples of the stride, a confidence logit and optionally head parameters.
    """

    def __init__(self, anchor, box, logit, params=None, image_id=''):
        self.anchor = int(anchor)
        self.box = np.array(box, dtype=float)
        if self.box.shape != (4,) or not np.all(np.isfinite(self.box)):
            raise ValidationError("Raw box offsets must be four finite numbers")
        self.logit = float(logit)
        if not math.isfinite(self.logit):
            raise ValidationError("Raw logit must be finite")
        self.params = params
        self.image_id = image_id

    @classmethod
    def from_dict(cls, document):
        document = jsonio.check(RAW_PREDICTION_SCHEMA, document, name='raw prediction')
        params = document.get('params')
        return cls(document['anchor'], document['box'], document['logit'],
                   params=HeadParams.from_dict(params) if params is not None else None,
                   image_id=document.get('image_id', ''))

    def to_dict(self):
        document = OrderedDict([('image_id', self.image_id), ('anchor', self.anchor), ('box', self.box),
                                ('logit', self.logit)])
        if self.params is not None:
            document['params'] = self.params.to_dict()
        return document


RAW_PREDICTION_SCHEMA = Schema({
    Optional('image_id'): str,
    Required('anchor'): All(jsonio.integer, Range(min=0)),
    Required('box'): jsonio.vector(4),
    Required('logit'): jsonio.finite_number,
    Optional('params'): dict,
})


class Detection(object):
    """
    Decoded head detection with its confidence and, when predicted, its head parameters
    """

    def __init__(self, bbox, confidence, params=None, anchor=None):
        if not isinstance(bbox, BBox):
            bbox = BBox.from_list(bbox)
        validate_float('confidence', confidence, min_value=0.0, max_value=1.0)
        self.bbox = bbox
        self.confidence = float(confidence)
        self.params = params
        self.anchor = anchor

    def to_dict(self):
        document = OrderedDict([('bbox', self.bbox.as_list()), ('confidence', self.confidence)])
        if self.params is not None:
            document['params'] = self.params.to_dict()
        return document

    @classmethod
    def from_dict(cls, document):
        document = jsonio.check(DETECTION_SCHEMA, document, name='detection')
        params = document.get('params')
        return cls(BBox.from_list(document['bbox']), document['confidence'],
                   params=HeadParams.from_dict(params) if params is not None else None)

    def __repr__(self):
        return "Detection(%r, confidence=%r)" % (self.bbox, self.confidence)


DETECTION_SCHEMA = Schema({
    Optional('image_id'): str,
    Required('bbox'): jsonio.BOX_SCHEMA,
    Required('confidence'): All(jsonio.finite_number, Range(min=0.0, max=1.0)),
    Optional('params'): dict,
}, extra=ALLOW_EXTRA)


DECODE = {
    'grid': {'type': 'instance', 'class': AnchorGrid},
    'conf_threshold': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0},
}

DECODE_ERRORRETURN = {
    'detections [-]': None,
    'confidences [-]': None,
}


@Validator(DECODE, DECODE_ERRORRETURN)
def decode(raw, grid, conf_threshold=0.5):
    """
    Converts the raw predictions of one image into detections. There must be exactly one raw prediction per
    anchor; predictions are matched to anchors by their anchor index. Detections are listed in anchor order and
    those with a confidence below the threshold are dropped. The log-size offsets are clamped to
    :math:`\\pm \\ln 10^4` and boxes narrower or lower than 1e-6 px are dropped. Head parameters are passed through.

    :param raw: Raw predictions (:class:`RawPrediction`), one per anchor
    :param grid: Anchor grid (:class:`AnchorGrid`)
    :param conf_threshold: Smallest confidence of a kept detection [:math:`-`] (optional, default= 0.5)

    .. math::
        c = a + (d_x, d_y) \\cdot s

        (w, h) = (s \\cdot e^{d_w}, s \\cdot e^{d_h}), \\quad |d_w|, |d_h| \\leq \\ln 10^4

        p = \\frac{1}{1 + e^{-z}}

    :returns: Dictionary with the following keys:

        - 'detections [-]': List of :class:`Detection`
        - 'confidences [-]': Confidence of every anchor, in anchor order

    """
    raw = list(raw)
    if len(raw) != grid.count:
        raise ValidationError("Got %i raw predictions for a grid of %i anchors" % (len(raw), grid.count))
    ordered = [None] * grid.count
    for prediction in raw:
        if prediction.anchor >= grid.count or ordered[prediction.anchor] is not None:
            raise ValidationError("Anchor index %i is out of range or repeated" % prediction.anchor)
        ordered[prediction.anchor] = prediction

    offsets = np.array([prediction.box for prediction in ordered])
    logits = np.array([prediction.logit for prediction in ordered])
    strides = grid.anchor_strides.astype(float)
    cx = grid.centers[:, 0] + offsets[:, 0] * strides
    cy = grid.centers[:, 1] + offsets[:, 1] * strides
    log_sizes = np.clip(offsets[:, 2:4], -MAX_LOG_SIZE, MAX_LOG_SIZE)
    half_w = 0.5 * strides * np.exp(log_sizes[:, 0])
    half_h = 0.5 * strides * np.exp(log_sizes[:, 1])
    confidences = expit(logits)

    # huge centre offsets can collapse the corners onto one float
    valid = np.isfinite(cx) & np.isfinite(cy) & ((cx + half_w) - (cx - half_w) >= MIN_BOX_SIDE) & \
        ((cy + half_h) - (cy - half_h) >= MIN_BOX_SIDE)
    if not np.all(valid):
        logger.warning("Dropping %i degenerate boxes" % np.count_nonzero(~valid))

    detections = []
    for i in np.flatnonzero((confidences >= conf_threshold) & valid):
        detections.append(Detection(BBox(cx[i] - half_w[i], cy[i] - half_h[i], cx[i] + half_w[i], cy[i] + half_h[i]),
                                    confidences[i], params=ordered[i].params, anchor=int(i)))
    return {
        'detections [-]': detections,
        'confidences [-]': confidences,
    }


NMS = {
    'iou_threshold': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0},
}

NMS_ERRORRETURN = {
    'detections [-]': None,
    'suppressed [-]': np.nan,
}


def _nms_order(detections):
    return sorted(range(len(detections)), key=lambda i: (
        -detections[i].confidence, detections[i].bbox.x1, detections[i].bbox.y1, i))


@Validator(NMS, NMS_ERRORRETURN)
def nms(detections, iou_threshold=0.5):
    """
    Greedy non-maximum suppression. Detections are visited by decreasing confidence, ties broken by the smaller
    left edge and then the smaller top edge. A detection is kept when its IoU with every kept detection does not
    exceed the threshold.

    :param detections: List of :class:`Detection`
    :param iou_threshold: Largest IoU with a kept detection [:math:`-`] (optional, default= 0.5)

    :returns: Dictionary with the following keys:

        - 'detections [-]': Kept detections in the order in which they were kept
        - 'suppressed [-]': Number of suppressed detections

    """
    detections = list(detections)
    kept = []
    for i in _nms_order(detections):
        candidate = detections[i]
        if all(iou(candidate.bbox, other.bbox, validate=False, fail_silently=False)['iou [-]'] <= iou_threshold
               for other in kept):
            kept.append(candidate)
    return {
        'detections [-]': kept,
        'suppressed [-]': len(detections) - len(kept),
    }


def drop_tiny_detections(detections, min_area):
    """
    Removes detections whose box area is below ``min_area`` [:math:`px^2`]; heads that small are not annotated
    """
    validate_float('min_area', min_area, min_value=0.0)
    return [detection for detection in detections if detection.bbox.area >= min_area]


def load_raw_predictions(lines, strict=False):
    """
    Groups raw prediction JSONL records by ``image_id`` in order of first appearance.

    :returns: Tuple of an ordered dict image id -> list of :class:`RawPrediction` and the list of
        ``(line_number, message)`` of skipped lines
    """
    images = OrderedDict()
    errors = []
    for line_number, document, error in jsonio.iter_jsonl(lines, strict=strict):
        if error is None:
            try:
                prediction = RawPrediction.from_dict(document)
            except ValidationError as err:
                if strict:
                    raise ValidationError("Line %i: %s" % (line_number, str(err)))
                logger.warning("Skipping line %i - %s" % (line_number, str(err)))
                error = str(err)
        if error is not None:
            errors.append((line_number, error))
            continue
        images.setdefault(prediction.image_id, []).append(prediction)
    return images, errors


def postprocess_image(raw, grid, conf_threshold=0.5, iou_threshold=0.5, min_area=0.0):
    """
    Decoding, removal of tiny boxes and suppression for the raw predictions of one image
    """
    detections = decode(raw, grid, conf_threshold, validate=False, fail_silently=False)['detections [-]']
    if min_area > 0.0:
        detections = drop_tiny_detections(detections, min_area)
    return nms(detections, iou_threshold, validate=False, fail_silently=False)['detections [-]']


def postprocess_images(images, grid, conf_threshold=0.5, iou_threshold=0.5, min_area=0.0, threads=1,
                       progress=False):
    """
    Runs :func:`postprocess_image` for every image of an ordered mapping image id -> raw predictions.
    Images are spread over ``threads`` worker threads; the output keeps the input order.

    :returns: List of ``(image_id, detections)``
    """
    image_ids = list(images.keys())

    def work(image_id):
        return postprocess_image(images[image_id], grid, conf_threshold, iou_threshold, min_area)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as executor:
        results = list(tqdm(executor.map(work, image_ids), total=len(image_ids), disable=not progress,
                            desc='decode', unit='image'))
    logger.info("Decoded %i images into %i detections" % (len(image_ids), sum(len(r) for r in results)))
    return list(zip(image_ids, results))


def detection_records(results):
    """
    JSONL-ready records ``{"image_id", "bbox", "confidence", "params"?}`` of :func:`postprocess_images` output
    """
    records = []
    for image_id, detections in results:
        for detection in detections:
            record = OrderedDict([('image_id', image_id)])
            record.update(detection.to_dict())
            records.append(record)
    return records
