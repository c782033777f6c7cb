#!/usr/bin/env python
# -*- coding: utf-8 -*-

__author__ = 'Bruno Stuyts'

# Django and native Python packages
import os
import sys
import json
import logging
import argparse
from collections import OrderedDict

# 3rd party packages
import numpy as np

# Project imports
from pyhead.general import jsonio
from pyhead.general.exceptions import UsageError
from pyhead.general.geometry.rotation import rot6d_to_matrix
from pyhead.general.geometry.camera import project, head_bbox, face_bbox, alignment_crop, alignment_transform, \
    landmarks_2d
from pyhead.model.assets import HeadParams, generate_toy_assets, save_assets, load_assets, export_obj
from pyhead.model.synthesis import forward_canonical
from pyhead.optimisation.losses import LossWeights
from pyhead.optimisation.fitting import FitTargets, FitConfig, fit, initial_params
from pyhead.optimisation.gradcheck import run_gradient_checks, GRADIENT_TOLERANCE
from pyhead.detection.postprocessing import (
    make_anchor_grid, load_raw_predictions, postprocess_images, detection_records, DEFAULT_IMAGE_SIDE,
    DEFAULT_STRIDES)
from pyhead.detection.metrics import evaluate_records
from pyhead.dataset.filtering import run_pipeline, FixtureDetector
from pyhead.rendering.pncc import render_pncc, write_ppm

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

SCHEMAS_HELP = """
document schemas:
  assets       {version: 1, n_vertices, template, shape_basis, expr_basis, jaw_weights, jaw_pivot,
                triangles, subsample_indices, face_indices, landmark_indices}
  params       {shape, expression, jaw (3), rot6d (6), translation (2), scale}
  targets      {landmarks2d (L x 2), gt_rotation (3 x 3)?, gt_canonical (k x 3)?}
  raw (JSONL)  {image_id?, anchor, box: [dx, dy, dw, dh], logit, params?}
  dets (JSONL) {image_id, bbox: [x1, y1, x2, y2], confidence, params?, rotation?, landmarks2d?}
  gt (JSONL)   {image_id, heads: [[x1, y1, x2, y2], ...], rotation?, landmarks2d?, face_bbox?}
  qa (JSONL)   {image_id, width, height, heads, heads_flipped?, heads_left?, heads_right?, faces?}

exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime or numerical error
"""


class HeadArgumentParser(argparse.ArgumentParser):
    """
    Argument parser raising :class:`UsageError` instead of exiting
    """

    def error(self, message):
        raise UsageError(message)


def existing_file(path):
    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError("%s does not exist" % path)
    return path


def positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("%s is not an integer" % value)
    if number < 1:
        raise argparse.ArgumentTypeError("%s must be at least 1" % value)
    return number


def _load_params(path):
    return HeadParams.from_dict(jsonio.load_json(path))


def _read_lines(path):
    with open(path, 'r', encoding='utf-8') as f:
        return f.readlines()


def cmd_gen_assets(args):
    assets = generate_toy_assets(args.seed, args.n_vertices, args.k_shape, args.k_expr, args.n_landmarks)
    save_assets(assets, args.out)
    logger.info("Wrote %r to %s" % (assets, args.out))
    return EXIT_OK


def cmd_forward(args):
    assets = load_assets(args.assets)
    params = _load_params(args.params)
    vertices = forward_canonical(assets, params, fail_silently=False)['vertices [model]']
    if args.posed:
        rotation = rot6d_to_matrix(params.rot6d, fail_silently=False)['rotation_matrix [-]']
        vertices = vertices @ rotation.T
    export_obj(vertices, assets.triangles, args.out)
    return EXIT_OK


def cmd_fit(args):
    assets = load_assets(args.assets)
    targets = FitTargets.from_dict(jsonio.load_json(args.targets))
    init = _load_params(args.init) if args.init else initial_params(assets, targets)
    weights = LossWeights(w_3d=args.w_3d, w_rot=args.w_rot, w_reproj=args.w_reproj, w_cls=args.w_cls,
                          w_reg=args.w_reg)
    config = FitConfig(max_iters=args.max_iters, step_size=args.step_size, weights=weights,
                       scale_parameters=args.scale_parameters, polyak=args.polyak)
    result = fit(assets, targets, init, config, fail_silently=False)
    document = result['trace [-]'].to_dict()
    document['config'] = config.to_dict()
    jsonio.dump_json(document, args.out)
    return EXIT_OK


def cmd_align(args):
    assets = load_assets(args.assets)
    params = _load_params(args.params)
    vertices = forward_canonical(assets, params, fail_silently=False)['vertices [model]']
    rotation = rot6d_to_matrix(params.rot6d, fail_silently=False)['rotation_matrix [-]']
    projected = project(vertices, rotation, params.scale, params.translation,
                        fail_silently=False)['projected_head [-]']
    crop = alignment_crop(projected, assets, args.margin, fail_silently=False)
    face = face_bbox(projected, assets, fail_silently=False)
    transform = alignment_transform(crop['crop [px]'], args.output_size)
    document = OrderedDict([
        ('crop', crop['crop [px]'].as_list()),
        ('center', list(crop['center [px]'])),
        ('side', crop['side [px]']),
        ('margin', args.margin),
        ('output_size', args.output_size),
        ('transform', OrderedDict([('scale', transform['scale [-]']), ('offset', transform['offset [px]'])])),
        ('head_bbox', head_bbox(projected, fail_silently=False)['bbox [px]'].as_list()),
        ('face_bbox', face['bbox [px]'].as_list() if face['bbox [px]'] is not None else None),
        ('yaw', face['yaw [rad]']),
        ('landmarks2d', landmarks_2d(projected, assets)),
    ])
    jsonio.dump_json(document, args.out)
    return EXIT_OK


def cmd_decode(args):
    grid = make_anchor_grid(args.image_side, args.strides, fail_silently=False)['grid [-]']
    images, errors = load_raw_predictions(_read_lines(args.input), strict=args.strict)
    if errors:
        logger.warning("Skipped %i malformed raw prediction lines" % len(errors))
    results = postprocess_images(images, grid, args.conf_threshold, args.iou_threshold, args.min_area,
                                 threads=args.threads, progress=args.progress)
    jsonio.write_jsonl(detection_records(results), args.output)
    return EXIT_OK


def cmd_eval(args):
    predictions = [record for _, record, _ in jsonio.iter_jsonl(_read_lines(args.predictions), strict=True)]
    ground_truth = [record for _, record, _ in jsonio.iter_jsonl(_read_lines(args.ground_truth), strict=True)]
    report = evaluate_records(predictions, ground_truth, args.iou_threshold)
    jsonio.dump_json(report, args.out)
    return EXIT_OK


def cmd_filter(args):
    detector = None
    if args.detector_fixture:
        mapping = OrderedDict((record['image_id'], record) for _, record, _ in
                              jsonio.iter_jsonl(_read_lines(args.detector_fixture), strict=True))
        detector = FixtureDetector(mapping)
    result = run_pipeline(_read_lines(args.input), detector=detector, strict=args.strict, threads=args.threads,
                          progress=args.progress)
    jsonio.write_jsonl(result['kept [-]'], args.output)
    jsonio.dump_json(result['report [-]'].to_dict(), args.report)
    return EXIT_OK


def cmd_pncc(args):
    assets = load_assets(args.assets)
    params = _load_params(args.params)
    image = render_pncc(assets, params, args.size, args.margin, fail_silently=False)['image [-]']
    write_ppm(image, args.out)
    return EXIT_OK


def cmd_gradcheck(args):
    results = run_gradient_checks(seed=args.seed, n_points=args.points)
    sys.stdout.write(json.dumps(jsonio.to_jsonable(results), indent=2) + '\n')
    failed = [name for name, error in results.items() if not error <= GRADIENT_TOLERANCE]
    if failed:
        logger.error("Gradient check failed for %s" % ", ".join(failed))
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser():
    parser = HeadArgumentParser(prog='pyhead', description='Head model toolkit: synthesis, fitting, alignment, '
                                'detection post-processing, metrics, dataset filtering and PNCC rendering.',
                                epilog=SCHEMAS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('--log-level', default='WARNING', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='verbosity of the diagnostics on stderr (default: WARNING)')
    parser.add_argument('--progress', action='store_true', help='show progress bars on stderr')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    sub = subparsers.add_parser('gen-assets', help='generate a toy head model')
    sub.add_argument('--seed', type=int, default=7)
    sub.add_argument('--n-vertices', type=int, default=162)
    sub.add_argument('--k-shape', type=int, default=4)
    sub.add_argument('--k-expr', type=int, default=2)
    sub.add_argument('--n-landmarks', type=int, default=16)
    sub.add_argument('--out', required=True)
    sub.set_defaults(handler=cmd_gen_assets)

    sub = subparsers.add_parser('forward', help='synthesise a head mesh and export it as OBJ')
    sub.add_argument('--assets', required=True, type=existing_file)
    sub.add_argument('--params', required=True, type=existing_file)
    sub.add_argument('--posed', action='store_true', help='apply the global rotation')
    sub.add_argument('--out', required=True)
    sub.set_defaults(handler=cmd_forward)

    defaults = LossWeights()
    sub = subparsers.add_parser('fit', help='fit head parameters to landmarks (and optional 3D targets)')
    sub.add_argument('--assets', required=True, type=existing_file)
    sub.add_argument('--targets', required=True, type=existing_file)
    sub.add_argument('--init', type=existing_file, help='initial parameters (default: neutral head)')
    sub.add_argument('--max-iters', type=positive_int, default=2000)
    sub.add_argument('--step-size', type=float, default=0.05)
    sub.add_argument('--scale-parameters', action='store_true',
                     help='descend in coordinates scaled by the sensitivity of the objective to each parameter')
    sub.add_argument('--polyak', action='store_true', help='cap the step by the Polyak step')
    sub.add_argument('--w-3d', type=float, default=defaults.w_3d)
    sub.add_argument('--w-rot', type=float, default=defaults.w_rot)
    sub.add_argument('--w-reproj', type=float, default=defaults.w_reproj)
    sub.add_argument('--w-cls', type=float, default=defaults.w_cls)
    sub.add_argument('--w-reg', type=float, default=defaults.w_reg)
    sub.add_argument('--out', required=True)
    sub.set_defaults(handler=cmd_fit)

    sub = subparsers.add_parser('align', help='scale-preserving alignment crop of a head')
    sub.add_argument('--assets', required=True, type=existing_file)
    sub.add_argument('--params', required=True, type=existing_file)
    sub.add_argument('--margin', type=float, default=1.3)
    sub.add_argument('--output-size', type=positive_int, default=256)
    sub.add_argument('--out', required=True)
    sub.set_defaults(handler=cmd_align)

    sub = subparsers.add_parser('decode', help='decode raw predictions into detections with NMS')
    sub.add_argument('--input', required=True, type=existing_file)
    sub.add_argument('--output', required=True)
    sub.add_argument('--image-side', type=positive_int, default=DEFAULT_IMAGE_SIDE)
    sub.add_argument('--strides', type=positive_int, nargs='+', default=list(DEFAULT_STRIDES))
    sub.add_argument('--conf-threshold', type=float, default=0.5)
    sub.add_argument('--iou-threshold', type=float, default=0.5)
    sub.add_argument('--min-area', type=float, default=0.0)
    sub.add_argument('--threads', type=positive_int, default=1)
    sub.add_argument('--strict', action='store_true')
    sub.set_defaults(handler=cmd_decode)

    sub = subparsers.add_parser('eval', help='detection, pose and landmark metrics')
    sub.add_argument('--predictions', required=True, type=existing_file)
    sub.add_argument('--ground-truth', required=True, type=existing_file)
    sub.add_argument('--iou-threshold', type=float, default=0.5)
    sub.add_argument('--out', required=True)
    sub.set_defaults(handler=cmd_eval)

    sub = subparsers.add_parser('filter', help='dataset quality filtering')
    sub.add_argument('--input', required=True, type=existing_file)
    sub.add_argument('--output', required=True)
    sub.add_argument('--report', required=True)
    sub.add_argument('--strict', action='store_true', help='abort on unparseable lines')
    sub.add_argument('--threads', type=positive_int, default=1)
    sub.add_argument('--detector-fixture', type=existing_file,
                     help='JSONL records answering requests for missing fields')
    sub.set_defaults(handler=cmd_filter)

    sub = subparsers.add_parser('pncc', help='render the normalised coordinate code of a head as PPM')
    sub.add_argument('--assets', required=True, type=existing_file)
    sub.add_argument('--params', required=True, type=existing_file)
    sub.add_argument('--size', type=positive_int, default=256)
    sub.add_argument('--margin', type=float, default=1.3)
    sub.add_argument('--out', required=True)
    sub.set_defaults(handler=cmd_pncc)

    sub = subparsers.add_parser('gradcheck', help='finite-difference check of every analytic gradient')
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--points', type=positive_int, default=100)
    sub.set_defaults(handler=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        sys.stderr.write("%s: error: %s\n" % (parser.prog, str(err)))
        return EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.handler(args)
    except UsageError as err:
        logger.error(str(err))
        return EXIT_USAGE
    except ValueError as err:
        logger.error("Validation error: %s" % str(err))
        return EXIT_VALIDATION
    except (RuntimeError, ArithmeticError, OSError, np.linalg.LinAlgError) as err:
        logger.error("%s: %s" % (type(err).__name__, str(err)))
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
