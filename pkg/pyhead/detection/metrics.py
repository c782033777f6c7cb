#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import logging
from collections import OrderedDict

# 3rd party packages
import numpy as np
from voluptuous import Schema, Required, Optional, ALLOW_EXTRA

# Project imports
from pyhead.general import jsonio
from pyhead.general.validation import Validator
from pyhead.general.exceptions import ValidationError
from pyhead.general.geometry.boxes import BBox, iou
from pyhead.general.geometry.rotation import matrix_to_euler, wrap_angle, rot6d_to_matrix, check_rotation_matrix
from pyhead.detection.postprocessing import Detection, DETECTION_SCHEMA

logger = logging.getLogger(__name__)

COCO_THRESHOLDS = tuple(np.round(np.linspace(0.5, 0.95, 10), 2))


class PoseErrorReport(object):
    """
    Mean absolute yaw, pitch and roll errors and their mean, in radians
    """

    def __init__(self, mae_yaw, mae_pitch, mae_roll):
        self.mae_yaw = float(mae_yaw)
        self.mae_pitch = float(mae_pitch)
        self.mae_roll = float(mae_roll)
        self.mae_mean = (self.mae_yaw + self.mae_pitch + self.mae_roll) / 3.0

    def degrees(self):
        return tuple(np.degrees([self.mae_yaw, self.mae_pitch, self.mae_roll, self.mae_mean]))

    def to_dict(self):
        yaw, pitch, roll, mean = self.degrees()
        return OrderedDict([
            ('mae_yaw [rad]', self.mae_yaw),
            ('mae_pitch [rad]', self.mae_pitch),
            ('mae_roll [rad]', self.mae_roll),
            ('mae_mean [rad]', self.mae_mean),
            ('mae_yaw [deg]', yaw),
            ('mae_pitch [deg]', pitch),
            ('mae_roll [deg]', roll),
            ('mae_mean [deg]', mean),
        ])


POSE_MAE = {
    'preds': {'type': 'array', 'shape': (None, 3, 3)},
    'gts': {'type': 'array', 'shape': (None, 3, 3)},
}

POSE_MAE_ERRORRETURN = {
    'report [-]': None,
    'mae_yaw [rad]': np.nan,
    'mae_pitch [rad]': np.nan,
    'mae_roll [rad]': np.nan,
    'mae_mean [rad]': np.nan,
    'mae_mean [deg]': np.nan,
    'errors [rad]': None,
}


@Validator(POSE_MAE, POSE_MAE_ERRORRETURN)
def pose_mae(preds, gts):
    """
    Per-angle mean absolute pose error as reported on head pose benchmarks. Both rotations of a pair are converted
    with :func:`matrix_to_euler` and every angle difference is wrapped to :math:`(-\\pi, \\pi]` before taking its
    absolute value, so errors lie in :math:`[0, \\pi]`.

    :param preds: Predicted rotation matrices, n x 3 x 3
    :param gts: Ground truth rotation matrices, n x 3 x 3

    .. math::
        MAE_{yaw} = \\frac{1}{n} \\sum_i | \\text{wrap}(yaw_{p,i} - yaw_{gt,i}) |

    :returns: Dictionary with the following keys:

        - 'report [-]': :class:`PoseErrorReport`
        - 'mae_yaw [rad]', 'mae_pitch [rad]', 'mae_roll [rad]': Per-angle errors
        - 'mae_mean [rad]', 'mae_mean [deg]': Mean of the three
        - 'errors [rad]': Absolute wrapped errors per sample, n x 3 (yaw, pitch, roll)

    """
    preds = np.asarray(preds, dtype=float)
    gts = np.asarray(gts, dtype=float)
    if preds.shape[0] != gts.shape[0] or preds.shape[0] == 0:
        raise ValidationError("Got %i predicted and %i ground truth rotations, expected equal non-zero counts" % (
            preds.shape[0], gts.shape[0]))
    errors = np.zeros((preds.shape[0], 3))
    for i, (pred, gt) in enumerate(zip(preds, gts)):
        p = matrix_to_euler(pred, validate=False, fail_silently=False)['pose [-]'].as_tuple()
        g = matrix_to_euler(gt, validate=False, fail_silently=False)['pose [-]'].as_tuple()
        errors[i] = np.abs(wrap_angle(np.subtract(p, g)))
    report = PoseErrorReport(*errors.mean(axis=0))
    return {
        'report [-]': report,
        'mae_yaw [rad]': report.mae_yaw,
        'mae_pitch [rad]': report.mae_pitch,
        'mae_roll [rad]': report.mae_roll,
        'mae_mean [rad]': report.mae_mean,
        'mae_mean [deg]': np.degrees(report.mae_mean),
        'errors [rad]': errors,
    }


NME = {
    'pred2d': {'type': 'array', 'shape': (None, 2)},
    'gt2d': {'type': 'array', 'shape': (None, 2)},
    'gt_bbox': {'type': 'instance', 'class': BBox},
}

NME_ERRORRETURN = {
    'nme [-]': np.nan,
    'normalizer [px]': np.nan,
}


@Validator(NME, NME_ERRORRETURN)
def nme(pred2d, gt2d, gt_bbox):
    """
    Normalised mean landmark error, with the square root of the ground truth box area as normaliser

    :param pred2d: Predicted landmarks, L x 2 [:math:`px`]
    :param gt2d: Ground truth landmarks, L x 2 [:math:`px`]
    :param gt_bbox: Ground truth box with positive area

    .. math::
        NME = \\frac{1}{L} \\sum_i \\frac{\\| p_i - g_i \\|_2}{\\sqrt{w h}}

    :returns: Dictionary with the following keys:

        - 'nme [-]': Normalised mean error
        - 'normalizer [px]': :math:`\\sqrt{w h}`

    :raises DegenerateGeometryError: for a box without area
    """
    pred2d = np.asarray(pred2d, dtype=float)
    gt2d = np.asarray(gt2d, dtype=float)
    if pred2d.shape != gt2d.shape or pred2d.shape[0] == 0:
        raise ValidationError("pred2d %s and gt2d %s must have equal, non-empty shapes" % (
            str(pred2d.shape), str(gt2d.shape)))
    if gt_bbox.is_degenerate:
        raise ValidationError("gt_bbox must have a positive area")
    normalizer = np.sqrt(gt_bbox.width * gt_bbox.height)
    return {
        'nme [-]': np.mean(np.sqrt(np.sum((pred2d - gt2d) ** 2, axis=1))) / normalizer,
        'normalizer [px]': normalizer,
    }


def _match_detections(detections, ground_truth, iou_threshold):
    order = []
    for image, image_detections in enumerate(detections):
        for index, detection in enumerate(image_detections):
            order.append((detection.confidence, image, index))
    # stable, so equal confidences keep image and detection order
    order.sort(key=lambda item: -item[0])
    matched = [np.zeros(len(boxes), dtype=bool) for boxes in ground_truth]
    true_positive = np.zeros(len(order))
    for rank, (_, image, index) in enumerate(order):
        bbox = detections[image][index].bbox
        best, best_iou = None, -1.0
        for g, gt_box in enumerate(ground_truth[image]):
            if matched[image][g]:
                continue
            overlap = iou(bbox, gt_box, validate=False, fail_silently=False)['iou [-]']
            if overlap >= iou_threshold and overlap > best_iou:
                best, best_iou = g, overlap
        if best is not None:
            matched[image][best] = True
            true_positive[rank] = 1.0
    return true_positive


AVERAGE_PRECISION = {
    'iou_threshold': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0, 'min_exclusive': True},
}

AVERAGE_PRECISION_ERRORRETURN = {
    'ap [-]': np.nan,
    'precision [-]': None,
    'recall [-]': None,
    'n_ground_truth [-]': np.nan,
}


@Validator(AVERAGE_PRECISION, AVERAGE_PRECISION_ERRORRETURN)
def average_precision(detections, ground_truth, iou_threshold=0.5):
    """
    Average precision of head detections over a set of images. Detections of all images are pooled and visited
    by decreasing confidence. A detection is a true positive when it overlaps an unmatched ground truth box of
    its image with at least the IoU threshold; the unmatched box with the highest IoU is matched (lowest index on
    ties). The area under the precision-recall curve is integrated with all-point interpolation of the
    precision envelope. Without any ground truth box the AP is 0.

    :param detections: Per image a list of :class:`Detection`
    :param ground_truth: Per image a list of ground truth :class:`BBox`
    :param iou_threshold: Smallest IoU of a match [:math:`-`] (optional, default= 0.5) - Suggested range: 0.0 < iou_threshold <= 1.0

    .. math::
        AP = \\sum_k (r_{k+1} - r_k) \\max_{j \\geq k+1} p_j

    :returns: Dictionary with the following keys:

        - 'ap [-]': Average precision
        - 'precision [-]': Precision after every pooled detection
        - 'recall [-]': Recall after every pooled detection
        - 'n_ground_truth [-]': Number of ground truth boxes

    """
    detections = [list(image_detections) for image_detections in detections]
    ground_truth = [list(boxes) for boxes in ground_truth]
    if len(detections) != len(ground_truth):
        raise ValidationError("Detections are given for %i images, ground truth for %i" % (
            len(detections), len(ground_truth)))
    n_ground_truth = sum(len(boxes) for boxes in ground_truth)
    true_positive = _match_detections(detections, ground_truth, iou_threshold)
    if n_ground_truth == 0:
        return {
            'ap [-]': 0.0,
            'precision [-]': np.zeros(0),
            'recall [-]': np.zeros(0),
            'n_ground_truth [-]': 0,
        }

    tp = np.cumsum(true_positive)
    fp = np.cumsum(1.0 - true_positive)
    recall = tp / n_ground_truth
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)

    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return {
        'ap [-]': float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1])),
        'precision [-]': precision,
        'recall [-]': recall,
        'n_ground_truth [-]': n_ground_truth,
    }


def mean_average_precision(detections, ground_truth, thresholds='coco'):
    """
    Average precision averaged over IoU thresholds; ``'coco'`` selects 0.50, 0.55, ..., 0.95

    :returns: Dictionary with the keys 'map [-]' and 'ap_per_threshold [-]'
    """
    if isinstance(thresholds, str):
        if thresholds != 'coco':
            raise ValidationError("Unknown threshold set %s" % thresholds)
        thresholds = COCO_THRESHOLDS
    thresholds = [float(threshold) for threshold in thresholds]
    if not thresholds:
        raise ValidationError("At least one IoU threshold is required")
    per_threshold = OrderedDict()
    for threshold in thresholds:
        per_threshold[repr(threshold)] = average_precision(
            detections, ground_truth, threshold, fail_silently=False)['ap [-]']
    return {
        'map [-]': float(np.mean(list(per_threshold.values()))),
        'ap_per_threshold [-]': per_threshold,
    }


GROUND_TRUTH_SCHEMA = Schema({
    Required('image_id'): str,
    Required('heads'): [jsonio.BOX_SCHEMA],
    Optional('rotation'): jsonio.matrix(3),
    Optional('landmarks2d'): jsonio.matrix(2),
    Optional('face_bbox'): jsonio.BOX_SCHEMA,
}, extra=ALLOW_EXTRA)

PREDICTION_SCHEMA = DETECTION_SCHEMA.extend({
    Required('image_id'): str,
    Optional('rotation'): jsonio.matrix(3),
    Optional('landmarks2d'): jsonio.matrix(2),
})


def _prediction_rotation(record, detection):
    if 'rotation' in record:
        return check_rotation_matrix(record['rotation'], 'rotation of %s' % record['image_id'], tolerance=1e-6)
    if detection.params is not None:
        return rot6d_to_matrix(detection.params.rot6d, validate=False, fail_silently=False)['rotation_matrix [-]']
    return None


def evaluate_records(prediction_records, ground_truth_records, iou_threshold=0.5):
    """
    Metrics report for detection JSONL records against ground truth records
    ``{"image_id", "heads", "rotation"?, "landmarks2d"?, "face_bbox"?}``.

    Detection AP is computed at ``iou_threshold`` and averaged over the COCO thresholds. When ground truth
    records carry a rotation (landmarks), the most confident prediction of the image carrying a rotation
    (landmarks) is compared with it; the NME normaliser is ``face_bbox`` or else the first head box.

    :returns: Ordered dict ready for JSON output
    """
    images = OrderedDict()
    for record in ground_truth_records:
        record = jsonio.check(GROUND_TRUTH_SCHEMA, record, name='ground truth record')
        if record['image_id'] in images:
            raise ValidationError("Ground truth image %s is listed twice" % record['image_id'])
        images[record['image_id']] = {'gt': record, 'predictions': []}
    for record in prediction_records:
        record = jsonio.check(PREDICTION_SCHEMA, record, name='prediction record')
        if record['image_id'] not in images:
            raise ValidationError("Prediction for unknown image %s" % record['image_id'])
        images[record['image_id']]['predictions'].append((record, Detection.from_dict(record)))

    detections = [[detection for _, detection in entry['predictions']] for entry in images.values()]
    ground_truth = [[BBox.from_list(box) for box in entry['gt']['heads']] for entry in images.values()]
    ap = average_precision(detections, ground_truth, iou_threshold, fail_silently=False)
    coco = mean_average_precision(detections, ground_truth, 'coco')

    pred_rotations, gt_rotations, nmes = [], [], []
    for entry in images.values():
        gt = entry['gt']
        ranked = sorted(entry['predictions'], key=lambda item: -item[1].confidence)
        if 'rotation' in gt:
            for record, detection in ranked:
                rotation = _prediction_rotation(record, detection)
                if rotation is not None:
                    pred_rotations.append(rotation)
                    gt_rotations.append(check_rotation_matrix(gt['rotation'], 'rotation of %s' % gt['image_id'],
                                                              tolerance=1e-6))
                    break
        if 'landmarks2d' in gt:
            normalizer = gt.get('face_bbox', gt['heads'][0] if gt['heads'] else None)
            for record, _ in ranked:
                if 'landmarks2d' in record and normalizer is not None:
                    nmes.append(nme(record['landmarks2d'], gt['landmarks2d'], BBox.from_list(normalizer),
                                    fail_silently=False)['nme [-]'])
                    break

    report = OrderedDict([
        ('images', len(images)),
        ('detections', sum(len(image_detections) for image_detections in detections)),
        ('ground_truth_heads', ap['n_ground_truth [-]']),
        ('iou_threshold', iou_threshold),
        ('ap', ap['ap [-]']),
        ('map_coco', coco['map [-]']),
        ('ap_per_threshold', coco['ap_per_threshold [-]']),
    ])
    if pred_rotations:
        report['pose'] = pose_mae(np.array(pred_rotations), np.array(gt_rotations),
                                  fail_silently=False)['report [-]'].to_dict()
        report['pose']['samples'] = len(pred_rotations)
    if nmes:
        report['nme'] = float(np.mean(nmes))
        report['nme_samples'] = len(nmes)
    logger.info("Evaluated %i images, AP@%s = %.4f" % (len(images), repr(iou_threshold), report['ap']))
    return report
