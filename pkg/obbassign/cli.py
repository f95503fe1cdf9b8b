#!/usr/bin/env python3
"""
Command-line interface for label assignment dumps, gradient checks, tiling,
patch merging and evaluation.
"""
import argparse
import csv
import io
import math
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from .assignment import AssignConfig, AssignmentMap, GroundTruth, LevelSpec, build_assignment, default_levels
from .config import RunConfig, RunConfigError, Settings
from .dataio.categories import resolve_classes
from .dataio.dota import Annotation, class_from_result_filename, parse_results, write_results
from .dataio.sources import AnnotationDirectory, ResultDirectory, read_annotation_file, write_annotation_file
from .dataio.tiling import (
    annotation_extent,
    clip_annotations,
    outside_frame,
    parse_patch_id,
    patch_id,
    scale_annotations,
    scaled_size,
    tile_plan,
)
from .evaluation import ClassResult, EvalConfig, EvalGroundTruth, Metric, evaluate_dataset, mean_ap
from .gradcheck import run_gradcheck
from .postprocess import Detection, PatchOrigin, merge_patches


MANIFEST_FILENAME = 'manifest.csv'
MANIFEST_COLUMNS = ['patch_id', 'image_id', 'scale', 'x0', 'y0', 'width', 'height', 'annotations']
EVAL_COLUMNS = ['class', 'ap', 'n_gt', 'n_det', 'n_tp']


class UsageError(Exception):
    """Invalid parameter combination; reported through parser.error."""


def _log(message: str):
    print(message, file=sys.stderr)


def parse_image_size(text: str) -> Tuple[int, int]:
    """Parse WxH, e.g. 2048x1536."""
    parts = text.lower().split('x')
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"Image size must be WxH, got '{text}'")
    try:
        width, height = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"Image size must be WxH, got '{text}'")
    if width <= 0 or height <= 0:
        raise argparse.ArgumentTypeError(f"Image size must be positive, got '{text}'")
    return width, height


def _write_text(text: str, out_path: Optional[str]):
    """Data goes to the out file, or to stdout when none is given."""
    if out_path is None:
        sys.stdout.write(text)
        return
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(out_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    _log(f"💾 Wrote {out_path}")


def _class_indices(class_names: Sequence[str]) -> Dict[str, int]:
    return {name: i for i, name in enumerate(class_names)}


# --- assign ---

def _format_range(spec: LevelSpec) -> str:
    upper = 'inf)' if math.isinf(spec.range_max) else f"{spec.range_max:g}]"
    return f"({spec.range_min:g},{upper}"


def format_assignment_dump(
    assignment: AssignmentMap,
    class_names: Sequence[str],
    image_size: Tuple[int, int],
    cfg: AssignConfig
) -> str:
    """
    Line-oriented dump of an assignment.

    Header, one line per target (geometry, levels, positive count), then per
    level a summary line followed by its positive cells as
    "row col class J target", and finally totals and unassigned targets.
    """
    lines = [
        '# obbassign assignment dump',
        f"image {image_size[0]}x{image_size[1]}",
        f"c_threshold {cfg.c_threshold:g}",
        f"shrink {'true' if cfg.use_shrink else 'false'}",
        f"j_shrink {'true' if cfg.j_use_shrink else 'false'}",
        f"mls_short_ratio {cfg.mls_short_ratio:g}",
        f"targets {len(assignment.targets)}",
    ]
    per_target = assignment.positives_per_target()
    for index, target in enumerate(assignment.targets):
        o = target.obb
        level_names = ','.join(assignment.levels[j].spec.name for j in sorted(assignment.target_levels[index]))
        lines.append(
            f"target {index} {class_names[target.class_index]} "
            f"{o.cx:.3f} {o.cy:.3f} {o.w:.3f} {o.h:.3f} {o.theta:.6f} "
            f"levels {level_names} positives {per_target[index]}"
        )
    for level_index, grid in enumerate(assignment.levels):
        spec = grid.spec
        lines.append(
            f"level {spec.name} stride {spec.stride:g} grid {spec.grid_h}x{spec.grid_w} "
            f"range {_format_range(spec)} positives {grid.num_positive}"
        )
        for cell in assignment.positive_cells(level_index):
            lines.append(
                f"cell {cell.row} {cell.col} {class_names[cell.class_index]} "
                f"{cell.j_value:.6e} {cell.target_index}"
            )
    unassigned = assignment.unassigned_targets()
    lines.append(f"positives {assignment.num_positive()}")
    lines.append(f"unassigned {' '.join(str(i) for i in unassigned) if unassigned else 'none'}")
    return '\n'.join(lines) + '\n'


def _ground_truth(annotations: Sequence[Annotation], class_names: Sequence[str]) -> List[GroundTruth]:
    lookup = _class_indices(class_names)
    targets = []
    for a in annotations:
        if a.category not in lookup:
            raise ValueError(f"Unknown category '{a.category}' (classes: {', '.join(class_names)})")
        targets.append(GroundTruth(a.to_obb(), lookup[a.category]))
    return targets


def cmd_assign(args: argparse.Namespace, settings: Settings):
    """Build the label assignment for one annotation file and dump it."""
    try:
        cfg = AssignConfig(
            c_threshold=settings.c_threshold(),
            mls_short_ratio=settings.mls_short_ratio(),
            use_shrink=settings.shrink(),
            j_use_shrink=settings.j_use_shrink()
        )
        image_size = args.image_size or settings.image_size()
        strides, ranges = settings.levels()
        levels = default_levels(image_size[0], image_size[1], strides, ranges)
        class_names = resolve_classes(settings.classes())
    except ValueError as e:
        raise UsageError(str(e))

    _log(f"📖 Reading annotations: {args.annotations}")
    annotations = read_annotation_file(args.annotations)
    targets = _ground_truth(annotations, class_names)

    assignment = build_assignment(targets, levels, cfg)
    _write_text(format_assignment_dump(assignment, class_names, image_size, cfg), args.out)

    unassigned = assignment.unassigned_targets()
    _log(f"📊 {len(targets)} targets, {assignment.num_positive()} positive cells")
    if unassigned:
        _log(f"⚠️  {len(unassigned)} target(s) without positive cells: {' '.join(map(str, unassigned))}")


# --- gradcheck ---

def cmd_gradcheck(args: argparse.Namespace, settings: Settings) -> int:
    """Compare analytic ProbIoU gradients with finite differences."""
    count = settings.count()
    if count < 1:
        raise UsageError(f"--count must be at least 1, got {count}")
    step = settings.step()
    tolerance = settings.tolerance()
    if step <= 0 or tolerance <= 0:
        raise UsageError("--step and --tolerance must be positive")
    seed = settings.seed()
    eps = settings.eps()
    if not 0 < eps < 1e-3:
        raise UsageError(f"losses.eps must lie in (0, 1e-3), got {eps}")

    _log(f"🚀 Checking gradients on {count} pairs (seed {seed})")
    report = run_gradcheck(count, seed, step, tolerance, eps)
    _write_text(report.format(), args.out)
    if not report.passed:
        _log(f"❌ Max relative error {report.max_rel_error:.3e} exceeds tolerance {tolerance:.1e}")
        return 1
    _log(f"✅ Max relative error {report.max_rel_error:.3e}")
    return 0


# --- tile ---

def _annotation_sources(path: str) -> List[Tuple[str, List[Annotation]]]:
    """(image_id, annotations) from one file or every .txt file of a directory."""
    if os.path.isdir(path):
        directory = AnnotationDirectory(path)
        return [(image_id, directory.read(image_id)) for image_id in directory.image_ids()]
    image_id = os.path.splitext(os.path.basename(path))[0]
    return [(image_id, read_annotation_file(path))]


def _image_frame(
    image_id: str,
    annotations: Optional[List[Annotation]],
    explicit_size: Optional[Tuple[int, int]],
    default_size: Tuple[int, int]
) -> Tuple[int, int]:
    """
    Frame to tile for one image.

    A size given by flag or run config is used as is, with a warning for
    annotations reaching past it. Otherwise the default frame grows to hold
    every annotation.
    """
    if annotations is None:
        return explicit_size or default_size
    if explicit_size is not None:
        outside = outside_frame(annotations, *explicit_size)
        if outside:
            _log(f"⚠️  {image_id}: {len(outside)} annotation(s) reach past "
                 f"{explicit_size[0]}x{explicit_size[1]}; their outer parts are not tiled")
        return explicit_size
    extent_w, extent_h = annotation_extent(annotations)
    frame = max(default_size[0], extent_w), max(default_size[1], extent_h)
    if frame != tuple(default_size):
        _log(f"📐 {image_id}: frame {frame[0]}x{frame[1]} from annotation bounds")
    return frame


def cmd_tile(args: argparse.Namespace, settings: Settings):
    """Cut images into overlapping windows and write per-window annotations plus a manifest."""
    patch = settings.patch()
    gap = settings.gap()
    if not patch > gap >= 0:
        raise UsageError(f"Need patch > gap >= 0, got patch={patch}, gap={gap}")
    try:
        scales = settings.scales()
        min_fraction = settings.min_fraction()
    except ValueError as e:
        raise UsageError(str(e))
    if not 0.0 <= min_fraction <= 1.0:
        raise UsageError(f"--min-fraction must lie in [0, 1], got {min_fraction}")
    explicit_size = args.image_size or settings.image_size_override()
    default_size = settings.image_size()

    if args.annotations:
        if not args.out:
            raise UsageError("--out is required when tiling annotations")
        os.makedirs(args.out, exist_ok=True)
        _log(f"📖 Reading annotations: {args.annotations}")
        sources = _annotation_sources(args.annotations)
    else:
        sources = [(args.image_id, None)]

    rows = []
    for image_id, annotations in sources:
        image_size = _image_frame(image_id, annotations, explicit_size, default_size)
        for scale in scales:
            width, height = scaled_size(image_size[0], image_size[1], scale)
            scaled = scale_annotations(annotations, scale) if annotations is not None else None
            for window in tile_plan(width, height, patch, gap):
                name = patch_id(image_id, scale, window)
                count = ''
                if scaled is not None:
                    clipped = clip_annotations(scaled, window, min_fraction)
                    write_annotation_file(os.path.join(args.out, f"{name}.txt"), clipped)
                    count = len(clipped)
                rows.append([name, image_id, f"{scale:g}", window.x0, window.y0, window.width, window.height, count])

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(MANIFEST_COLUMNS)
    writer.writerows(rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_text(buffer.getvalue(), os.path.join(args.out, MANIFEST_FILENAME))
    else:
        _write_text(buffer.getvalue(), None)
    _log(f"📊 {len(rows)} windows from {len(sources)} image(s)")


# --- nms ---

def _read_detections(path: str, class_names: Sequence[str]) -> Tuple[Dict[str, List[Detection]], List[str]]:
    """Detections by image id from a result directory or a single Task1 file."""
    if os.path.isdir(path):
        return ResultDirectory(path).read(class_names), list(class_names)
    class_name = class_from_result_filename(os.path.basename(path))
    if class_name is None:
        raise ValueError(f"Cannot tell the class of {path}; expected a Task1_<class>.txt file")
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    try:
        parsed = parse_results(text, 0)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e
    by_image: Dict[str, List[Detection]] = {}
    for image_id, det in parsed:
        by_image.setdefault(image_id, []).append(det)
    return by_image, [class_name]


def merge_detection_sets(
    by_patch: Dict[str, List[Detection]],
    iou_threshold: float,
    score_threshold: float
) -> Dict[str, List[Detection]]:
    """Group patch detections by source image and merge each group."""
    grouped: Dict[str, List[Tuple[PatchOrigin, List[Detection]]]] = {}
    for name in sorted(by_patch):
        source_id, origin = parse_patch_id(name)
        grouped.setdefault(source_id, []).append((origin, by_patch[name]))
    return {
        source_id: merge_patches(patches, iou_threshold, score_threshold)
        for source_id, patches in sorted(grouped.items())
    }


def cmd_nms(args: argparse.Namespace, settings: Settings):
    """Filter, merge and suppress detections; write DOTA result files."""
    iou_threshold = settings.nms_iou_threshold()
    score_threshold = settings.score_threshold()
    if not 0.0 <= iou_threshold <= 1.0 or not 0.0 <= score_threshold <= 1.0:
        raise UsageError("--iou-thresh and --score-thresh must lie in [0, 1]")
    try:
        class_names = resolve_classes(settings.classes())
    except ValueError as e:
        raise UsageError(str(e))

    _log(f"📖 Reading detections: {args.detections}")
    by_patch, class_names = _read_detections(args.detections, class_names)
    merged = merge_detection_sets(by_patch, iou_threshold, score_threshold)

    lines: Dict[str, List[str]] = {name: [] for name in class_names}
    for source_id, dets in merged.items():
        for name, image_lines in write_results(dets, class_names, source_id).items():
            lines[name].extend(image_lines)

    ResultDirectory(args.out).write(lines)
    kept = sum(len(dets) for dets in merged.values())
    total = sum(len(dets) for dets in by_patch.values())
    _log(f"📊 Kept {kept} of {total} detections across {len(merged)} image(s)")
    _log(f"💾 Wrote results to {args.out}")


# --- eval ---

def _eval_ground_truth(
    directory: AnnotationDirectory,
    class_names: Sequence[str]
) -> Dict[str, List[EvalGroundTruth]]:
    lookup = _class_indices(class_names)
    skipped = set()
    gts: Dict[str, List[EvalGroundTruth]] = {}
    for image_id in directory.image_ids():
        gts[image_id] = []
        for a in directory.read(image_id):
            if a.category not in lookup:
                skipped.add(a.category)
                continue
            gts[image_id].append(EvalGroundTruth(a.to_obb(), lookup[a.category], bool(a.difficult)))
    if skipped:
        _log(f"⚠️  Ignoring ground truth of unlisted categories: {', '.join(sorted(skipped))}")
    return gts


def format_eval_table(results: Sequence[ClassResult], map_value: Optional[float]) -> str:
    width = max([len('class')] + [len(r.name) for r in results])
    lines = [f"{'class':<{width}}  {'ap':>8}  {'n_gt':>6}  {'n_det':>6}  {'n_tp':>6}"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.ap:8.4f}  {r.n_gt:6d}  {r.n_det:6d}  {r.n_tp:6d}")
    lines.append(f"mAP {map_value:.4f}" if map_value is not None else "mAP n/a")
    return '\n'.join(lines) + '\n'


def write_eval_csv(results: Sequence[ClassResult], map_value: Optional[float], out_path: str):
    parent = os.path.dirname(out_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(out_path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(EVAL_COLUMNS)
        for r in results:
            writer.writerow([r.name, f"{r.ap:.6f}", r.n_gt, r.n_det, r.n_tp])
        writer.writerow(['mAP', f"{map_value:.6f}" if map_value is not None else '', '', '', ''])
    _log(f"💾 Wrote {out_path}")


def cmd_eval(args: argparse.Namespace, settings: Settings):
    """Per-class AP and mAP of result files against annotation files."""
    try:
        cfg = EvalConfig(
            iou_threshold=settings.eval_iou_threshold(),
            metric=Metric(settings.metric()),
            skip_difficult=settings.skip_difficult()
        )
        class_names = resolve_classes(settings.classes())
    except ValueError as e:
        raise UsageError(str(e))

    _log(f"📖 Reading ground truth: {args.ground_truth}")
    gts = _eval_ground_truth(AnnotationDirectory(args.ground_truth), class_names)
    _log(f"📖 Reading results: {args.results}")
    dets = ResultDirectory(args.results).read(class_names)

    results = evaluate_dataset(dets, gts, class_names, cfg)
    try:
        map_value = mean_ap(results, skip_absent=settings.skip_absent())
    except ValueError:
        _log("⚠️  No class has ground truth; mAP is undefined")
        map_value = None

    sys.stdout.write(format_eval_table(results, map_value))
    if args.out:
        write_eval_csv(results, map_value, args.out)
    if map_value is not None:
        _log(f"✅ mAP ({cfg.metric.value}) = {map_value:.4f}")


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Run config file with key = value lines')
    common.add_argument('--classes', help='dota1.0, dota1.5, hrsc2016 or a comma-separated class list')

    parser = argparse.ArgumentParser(
        prog='obbassign',
        description='Oriented-box label assignment, tiling, merging and evaluation tools',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Dump the label assignment of one annotation file
  python -m obbassign assign P0001.txt --image-size 1024x1024 --out P0001.assign.txt

  # Check ProbIoU gradients on 1000 seeded pairs
  python -m obbassign gradcheck --count 1000 --seed 0

  # Tile annotations into 1024 windows with a 512 gap at two scales
  python -m obbassign tile --annotations labelTxt --image-size 4000x4000 --scales 0.5,1.0 --out split

  # Merge patch detections and evaluate them
  python -m obbassign nms patch_results --out merged
  python -m obbassign eval merged labelTxt --metric voc07 --out map.csv

Configuration:
  - Package defaults are in obbassign/config.yaml
  - --config FILE overrides them; command line flags override both
"""
    )
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    assign = subparsers.add_parser('assign', parents=[common], help='Dump the label assignment of an annotation file')
    assign.add_argument('annotations', help='DOTA annotation file')
    assign.add_argument('--image-size', type=parse_image_size, help='Image size WxH')
    assign.add_argument('--levels', help='Pyramid levels as stride:min:max triples, e.g. 8:0:64,16:64:inf')
    assign.add_argument('--c-threshold', dest='c_threshold', type=float, help='Ellipse sampling threshold C')
    assign.add_argument('--shrink', dest='shrink', action=argparse.BooleanOptionalAction, default=None,
                        help='Sample with the shrunk covariance')
    assign.add_argument('--j-shrink', dest='j_use_shrink', action=argparse.BooleanOptionalAction, default=None,
                        help='Use the shrunk covariance for the center-distance metric')
    assign.add_argument('--mls-short-ratio', dest='mls_short_ratio', type=float,
                        help='Multi-level sampling short-edge to stride ratio')
    assign.add_argument('--out', help='Dump file (default: stdout)')
    assign.set_defaults(handler=cmd_assign)

    gradcheck = subparsers.add_parser('gradcheck', parents=[common], help='Check ProbIoU gradients numerically')
    gradcheck.add_argument('--count', type=int, help='Number of random pairs')
    gradcheck.add_argument('--seed', type=int, help='Random seed')
    gradcheck.add_argument('--step', type=float, help='Finite-difference step')
    gradcheck.add_argument('--tolerance', type=float, help='Largest accepted relative error')
    gradcheck.add_argument('--out', help='Report file (default: stdout)')
    gradcheck.set_defaults(handler=cmd_gradcheck)

    tile = subparsers.add_parser('tile', parents=[common], help='Cut images into overlapping windows')
    tile.add_argument('--annotations', help='Annotation file or directory to clip per window')
    tile.add_argument('--image-size', type=parse_image_size, help='Source image size WxH (default: config.yaml size, grown to hold the annotations)')
    tile.add_argument('--image-id', default='image', help='Image id used when no annotations are given')
    tile.add_argument('--patch', type=int, help='Window side in pixels')
    tile.add_argument('--gap', type=int, help='Overlap between windows in pixels')
    tile.add_argument('--min-fraction', dest='min_fraction', type=float,
                      help='Keep clipped annotations with at least this fraction inside')
    tile.add_argument('--scales', help='Comma-separated image scales, e.g. 0.5,1.0')
    tile.add_argument('--out', help='Output directory (default: manifest to stdout)')
    tile.set_defaults(handler=cmd_tile)

    nms = subparsers.add_parser('nms', parents=[common], help='Merge patch detections with rotated NMS')
    nms.add_argument('detections', help='Task1_<class>.txt file or directory of them')
    nms.add_argument('--iou-thresh', dest='iou_thresh', type=float, help='NMS IoU threshold')
    nms.add_argument('--score-thresh', dest='score_thresh', type=float, help='Minimum confidence kept')
    nms.add_argument('--out', required=True, help='Output directory for merged result files')
    nms.set_defaults(handler=cmd_nms)

    evaluate = subparsers.add_parser('eval', parents=[common], help='Compute per-class AP and mAP')
    evaluate.add_argument('results', help='Directory of Task1_<class>.txt result files')
    evaluate.add_argument('ground_truth', help='Directory of DOTA annotation files')
    evaluate.add_argument('--iou-thresh', dest='iou_thresh', type=float, help='Matching IoU threshold')
    evaluate.add_argument('--metric', choices=[m.value for m in Metric], help='AP metric')
    evaluate.add_argument('--skip-difficult', dest='skip_difficult', action=argparse.BooleanOptionalAction,
                          default=None, help='Ignore detections matched to difficult ground truth')
    evaluate.add_argument('--out', help='CSV report file')
    evaluate.set_defaults(handler=cmd_eval)

    return parser


def main(argv: Optional[Sequence[str]] = None):
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        run_config = RunConfig.from_file(args.config) if args.config else RunConfig()
    except RunConfigError as e:
        parser.error(str(e))

    settings = Settings(args, run_config)
    try:
        code = args.handler(args, settings)
    except UsageError as e:
        parser.error(str(e))
    except KeyboardInterrupt:
        _log("\n⚠️  Operation cancelled by user.")
        sys.exit(1)
    except Exception as e:
        _log(f"❌ Error: {e}")
        sys.exit(1)

    if code:
        sys.exit(code)


if __name__ == '__main__':
    main()
