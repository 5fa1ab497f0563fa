"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Numbers are printed with 9 significant digits.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError, NumericalError
from .face_model import BOX_STYLES, bbox_from_pose, canonical_mesh, default_calibration_points, load_mesh
from .geometry import BBox, Intrinsics, Pose6DoF, RawPose, image_intrinsics, project

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(v) -> str:
    return f"{float(v):.9g}"


def fmt_row(values) -> str:
    return " ".join(fmt(v) for v in np.ravel(values))


def _pose(values) -> Pose6DoF:
    return Pose6DoF(values[:3], values[3:])


def _mesh(args):
    return load_mesh(args.mesh) if args.mesh else canonical_mesh()


def _ordered_map(fn: Callable, items: Sequence, jobs: int) -> list:
    """Map preserving input order; ``jobs > 1`` uses worker processes."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands; each returns the output text


def cmd_project(args) -> str:
    mesh = _mesh(args)
    pts = default_calibration_points(mesh) if args.calibration else mesh.points
    k = image_intrinsics(*args.image_size)
    return "".join(fmt_row(q) + "\n" for q in project(pts, _pose(args.pose), k))


def cmd_convert_pose(args) -> str:
    from .pose_transform import global_to_local, local_to_global

    fn = local_to_global if args.direction == "local-to-global" else global_to_local
    out = fn(_pose(args.pose), BBox(*args.box), *args.image_size, mode=args.mode)
    if isinstance(out, RawPose):
        # raw mode: 3x3 linear part row-major, then translation
        return fmt_row(np.concatenate([out.linear.ravel(), out.t])) + "\n"
    return fmt_row(out.as_vector()) + "\n"


def cmd_bbox(args) -> str:
    k = image_intrinsics(*args.image_size)
    clip = tuple(args.image_size) if args.clip else None
    b = bbox_from_pose(_mesh(args), _pose(args.pose), k, BOX_STYLES[args.style], clip_to=clip)
    return fmt_row(b.as_tuple()) + "\n"


def _read_correspondences(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, start=1):
            tok = ln.split()
            if not tok or tok[0].startswith("#"):
                continue
            if len(tok) != 5:
                raise DataError(f"{path} line {lineno}: expected 'X Y Z u v', got {len(tok)} fields")
            try:
                rows.append([float(t) for t in tok])
            except ValueError:
                raise DataError(f"{path} line {lineno}: non-numeric field") from None
    if not rows:
        raise DataError(f"{path}: no correspondences")
    a = np.array(rows)
    return a[:, :3], a[:, 3:]


def cmd_solve_pnp(args) -> str:
    from .pnp import Correspondences, SolverConfig, solve_pnp

    p3, p2 = _read_correspondences(args.input)
    if args.intrinsics:
        k = Intrinsics(*args.intrinsics)
    elif args.image_size:
        k = image_intrinsics(*args.image_size)
    else:
        raise UsageError("solve-pnp needs --image-size or --intrinsics")
    cfg = SolverConfig(max_iterations=args.max_iterations)
    res = solve_pnp(Correspondences(p3, p2), k, cfg)
    return fmt_row(res.pose.as_vector()) + "\n" + f"rmse {fmt(res.rmse)}\niterations {res.iterations}\n"


def _label_one(item, route):
    from .dataset import weak_label

    record, dets = item
    return weak_label(record, dets, canonical_mesh(), route=route)


def cmd_gen_labels(args) -> str:
    from .dataset import parse_boxes, parse_landmarks, record_to_line

    size = tuple(args.image_size) if args.image_size else None
    records = parse_boxes(args.boxes, default_size=size)
    dets = parse_landmarks(args.detections)
    items = [(r, dets.get(r.path, [])) for r in records]
    if args.mesh:
        # worker processes cannot share a custom mesh cheaply; label in-process
        from .dataset import weak_label

        mesh = _mesh(args)
        out = [weak_label(r, d, mesh, route=args.route) for r, d in items]
    else:
        out = _ordered_map(partial(_label_one, route=args.route), items, args.jobs)
    return "".join(record_to_line(r) + "\n" for r in out)


def _augment_one(item, mirror, scale, crop, random):
    from .dataset import AugmentSpec, augment, sample_augment_spec

    record, seed = item
    if random:
        spec = sample_augment_spec(np.random.default_rng(seed), record.width, record.height)
    else:
        spec = AugmentSpec(mirror=mirror, scale=scale, crop=None if crop is None else BBox(*crop))
    return augment(record, spec)


def cmd_augment(args) -> str:
    from .dataset import read_dataset, record_to_line

    records = read_dataset(args.input)
    # one child seed per record keeps results independent of --jobs
    seeds = np.random.SeedSequence(args.seed).spawn(len(records))
    fn = partial(_augment_one, mirror=args.mirror, scale=args.scale, crop=args.crop, random=args.random)
    out = _ordered_map(fn, list(zip(records, seeds)), args.jobs)
    return "".join(record_to_line(r) + "\n" for r in out)


def cmd_eval(args) -> str:
    from .evaluation import YAW_RANGE, evaluate_files

    rng = None if args.no_filter else (args.range or YAW_RANGE)
    report = evaluate_files(args.gt, args.pred, _mesh(args), rng)
    return "".join(ln + "\n" for ln in report.lines())


def cmd_render(args) -> str:
    from .dataset import read_dataset
    from .overlay import render_overlay

    records = read_dataset(args.input)
    if not records:
        raise DataError(f"{args.input}: no records")
    if args.image is not None:
        match = [r for r in records if r.path == args.image]
        if not match:
            raise DataError(f"{args.input}: no record for image {args.image}")
        record = match[0]
    else:
        if not 0 <= args.index < len(records):
            raise DataError(f"record index {args.index} out of range (0..{len(records) - 1})")
        record = records[args.index]
    poses = [f.pose for f in record.faces if f.pose is not None]
    return render_overlay(record, poses, _mesh(args), BOX_STYLES[args.style])


def cmd_vote_boxes(args) -> str:
    from .losses import ScoredBox, box_vote

    boxes = []
    with open(args.input, encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, start=1):
            tok = ln.split()
            if not tok or tok[0].startswith("#"):
                continue
            if len(tok) != 5:
                raise DataError(f"{args.input} line {lineno}: expected 'x y w h score'")
            try:
                v = [float(t) for t in tok]
            except ValueError:
                raise DataError(f"{args.input} line {lineno}: non-numeric field") from None
            boxes.append(ScoredBox(BBox(*v[:4]), v[4]))
    out = box_vote(boxes, args.iou)
    return "".join(fmt_row([*b.box.as_tuple(), b.score]) + "\n" for b in out)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="face6dof", description="6DoF face pose geometry toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out=True):
        sp.add_argument("--mesh", help="face mesh file (default: bundled canonical mesh)")
        if out:
            sp.add_argument("--out", help="write output here instead of standard output")

    def pose_arg(sp, required=True):
        sp.add_argument("--pose", type=float, nargs=6, required=required,
                        metavar=("RX", "RY", "RZ", "TX", "TY", "TZ"), help="rotation vector and translation")

    def size_arg(sp, required=True):
        sp.add_argument("--image-size", type=float, nargs=2, required=required, metavar=("W", "H"),
                        help="image width and height in pixels")

    sp = sub.add_parser("project", help="project mesh points with a global pose")
    pose_arg(sp); size_arg(sp); common(sp)
    sp.add_argument("--calibration", action="store_true", help="project the five calibration points only")
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("convert-pose", help="convert a pose between crop and image frames")
    pose_arg(sp); size_arg(sp); common(sp)
    sp.add_argument("--box", type=float, nargs=4, required=True, metavar=("X", "Y", "W", "H"),
                    help="crop box in image pixels")
    sp.add_argument("--direction", choices=("local-to-global", "global-to-local"), required=True)
    sp.add_argument("--mode", choices=("orthogonalized", "raw"), default="orthogonalized",
                    help="raw prints the 3x3 linear part row-major, then t")
    sp.set_defaults(func=cmd_convert_pose)

    sp = sub.add_parser("bbox", help="face box projected from a global pose")
    pose_arg(sp); size_arg(sp); common(sp)
    sp.add_argument("--style", choices=sorted(BOX_STYLES), default="tight")
    sp.add_argument("--clip", action="store_true", help="clip the box to the image")
    sp.set_defaults(func=cmd_bbox)

    sp = sub.add_parser("solve-pnp", help="pose from 'X Y Z u v' correspondences")
    sp.add_argument("input", help="correspondence file")
    size_arg(sp, required=False); common(sp)
    sp.add_argument("--intrinsics", type=float, nargs=3, metavar=("F", "CX", "CY"),
                    help="explicit camera instead of --image-size")
    sp.add_argument("--max-iterations", type=int, default=100)
    sp.set_defaults(func=cmd_solve_pnp)

    sp = sub.add_parser("gen-labels", help="weak pose labels from detector boxes and landmarks")
    sp.add_argument("--boxes", required=True, help="ground-truth box annotation file")
    sp.add_argument("--detections", required=True, help="detection file: boxes + 5 landmarks (+ score)")
    size_arg(sp, required=False); common(sp)
    sp.add_argument("--route", choices=("refined", "crop"), default="refined",
                    help="refined (default) polishes the crop-frame solve against the image camera")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_gen_labels)

    sp = sub.add_parser("augment", help="crop / mirror / scale a pose dataset")
    sp.add_argument("input", help="pose dataset file")
    common(sp)
    sp.add_argument("--mirror", action="store_true")
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--crop", type=float, nargs=4, metavar=("X", "Y", "W", "H"))
    sp.add_argument("--random", action="store_true", help="sample a training augmentation per image")
    sp.add_argument("--seed", type=int, default=0, help="seed for --random (default 0)")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_augment)

    sp = sub.add_parser("eval", help="rotation / translation MAE report")
    sp.add_argument("--gt", required=True, help="ground-truth file")
    sp.add_argument("--pred", required=True, help="prediction file")
    common(sp)
    sp.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"),
                    help="Euler range filter in degrees (default -99 99)")
    sp.add_argument("--no-filter", action="store_true", help="disable the Euler range filter")
    sp.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; evaluation is single-pass")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("render", help="SVG overlay for one dataset record")
    sp.add_argument("input", help="pose dataset file")
    common(sp)
    sp.add_argument("--index", type=int, default=0, help="record index (default 0)")
    sp.add_argument("--image", help="select the record by image path instead")
    sp.add_argument("--style", choices=sorted(BOX_STYLES), default="tight")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("vote-boxes", help="box voting over 'x y w h score' lines")
    sp.add_argument("input")
    common(sp, out=True)
    sp.add_argument("--iou", type=float, default=0.5, help="voting IoU threshold")
    sp.set_defaults(func=cmd_vote_boxes)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # usage errors exit 1, --help exits 0
        return int(e.code or 0)
    try:
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        text = args.func(args)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except UsageError as e:
        print(f"face6dof: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as e:
        print(f"face6dof: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as e:
        print(f"face6dof: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def run() -> None:
    sys.exit(main())
