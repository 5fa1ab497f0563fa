"""Pose evaluation: face selection, range filtering and MAE reports."""
from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DataError
from .face_model import BoxStyle, FaceMesh, bbox_from_pose, canonical_mesh
from .geometry import BBox, EulerAngles, Pose6DoF, euler_from_mat, image_intrinsics
from .losses import iou

YAW_RANGE = (-99.0, 99.0)
CENTER_MIN_SCORE = 0.9


def angular_error(a_deg: float, b_deg: float) -> float:
    d = abs(float(a_deg) - float(b_deg)) % 360.0
    return min(d, 360.0 - d)


@dataclass(frozen=True, eq=False)
class EvalPair:
    predicted: Pose6DoF
    gt_euler: EulerAngles
    gt_t: Optional[np.ndarray] = None
    score: float = 1.0
    image: str = ""

    def __post_init__(self):
        if self.gt_t is not None:
            t = np.array(self.gt_t, dtype=np.float64).reshape(3)
            t.setflags(write=False)
            object.__setattr__(self, "gt_t", t)


@dataclass(frozen=True)
class EvalReport:
    yaw: float
    pitch: float
    roll: float
    mae_r: float
    # translation fields are None when no pair carries a translation label
    x: Optional[float]
    y: Optional[float]
    z: Optional[float]
    mae_t: Optional[float]
    evaluated: int
    filtered: int = 0
    unmatched: int = 0

    def lines(self) -> list[str]:
        def fmt(v):
            return "nan" if v is None else f"{v:.9g}"

        keys = ("yaw", "pitch", "roll", "mae_r", "x", "y", "z", "mae_t")
        out = [f"{k} {fmt(getattr(self, k))}" for k in keys]
        out += [f"{k} {getattr(self, k)}" for k in ("evaluated", "filtered", "unmatched")]
        return out


def filter_yaw(pairs: Sequence[EvalPair], lo: float = YAW_RANGE[0], hi: float = YAW_RANGE[1]) -> list[EvalPair]:
    """Keep pairs whose ground-truth pitch, yaw and roll all lie in [lo, hi]."""
    return [p for p in pairs if all(lo <= a <= hi for a in p.gt_euler.as_tuple())]


def select_by_iou(candidates: Sequence[tuple[Pose6DoF, BBox]], gt_box: BBox) -> int:
    if not candidates:
        raise DataError("select_by_iou needs at least one candidate")
    scores = [iou(b, gt_box) for _, b in candidates]
    return int(np.argmax(scores))


def select_by_center(
    candidates: Sequence[tuple[Pose6DoF, BBox, float]],
    img_w: float,
    img_h: float,
    min_score: float = CENTER_MIN_SCORE,
) -> Optional[int]:
    best, best_d = None, np.inf
    for i, (_, b, s) in enumerate(candidates):
        if s <= min_score:
            continue
        cx, cy = b.center
        d = np.hypot(cx - img_w / 2.0, cy - img_h / 2.0)
        if d < best_d:
            best, best_d = i, d
    return best


def evaluate(pairs: Sequence[EvalPair], filtered: int = 0, unmatched: int = 0) -> EvalReport:
    """Per-axis MAEs; MAE_r and MAE_t are the means of the three axes."""
    if not pairs:
        raise DataError("evaluate needs at least one pair")
    errs = np.empty((len(pairs), 3))
    t_errs = []
    for i, p in enumerate(pairs):
        e = euler_from_mat(p.predicted.linear)
        g = p.gt_euler
        errs[i] = [angular_error(e.yaw, g.yaw), angular_error(e.pitch, g.pitch), angular_error(e.roll, g.roll)]
        if p.gt_t is not None:
            t_errs.append(np.abs(p.predicted.t - p.gt_t))
    yaw, pitch, roll = (float(v) for v in errs.mean(axis=0))
    mae_r = (yaw + pitch + roll) / 3.0
    if t_errs:
        x, y, z = (float(v) for v in np.mean(t_errs, axis=0))
        mae_t = (x + y + z) / 3.0
    else:
        x = y = z = mae_t = None
    return EvalReport(yaw, pitch, roll, mae_r, x, y, z, mae_t, len(pairs), filtered, unmatched)


# ---------------------------------------------------------------------------
# file formats


@dataclass(frozen=True, eq=False)
class Prediction:
    image: str
    score: float
    pose: Pose6DoF


@dataclass(frozen=True, eq=False)
class GroundTruth:
    image: str
    width: float
    height: float
    euler: EulerAngles
    box: Optional[BBox] = None
    t: Optional[np.ndarray] = None


PathOrStream = Union[str, os.PathLike, io.TextIOBase]


def _rows(source: PathOrStream):
    text = source.read() if hasattr(source, "read") else open(source, encoding="utf-8").read()
    for lineno, ln in enumerate(text.splitlines(), start=1):
        ln = ln.strip()
        if ln and not ln.startswith("#"):
            yield lineno, ln.split()


def _floats(tok, lineno):
    try:
        vals = [float(t) for t in tok]
    except ValueError:
        raise DataError(f"line {lineno}: non-numeric field in {' '.join(tok)!r}") from None
    if not all(np.isfinite(vals)):
        raise DataError(f"line {lineno}: non-finite value")
    return vals


def parse_predictions(source: PathOrStream) -> list[Prediction]:
    """``image_path score r_x r_y r_z t_x t_y t_z`` per line, global frame."""
    out = []
    for lineno, tok in _rows(source):
        if len(tok) != 8:
            raise DataError(f"line {lineno}: expected 8 fields, got {len(tok)}")
        v = _floats(tok[1:], lineno)
        out.append(Prediction(tok[0], v[0], Pose6DoF(v[1:4], v[4:7])))
    return out


def parse_ground_truth(source: PathOrStream) -> list[GroundTruth]:
    """``image_path width height pitch yaw roll [x y w h] [t_x t_y t_z]``.

    Missing box or translation groups are written as ``-`` placeholders.
    """
    out = []
    for lineno, tok in _rows(source):
        if len(tok) not in (6, 10, 13):
            raise DataError(f"line {lineno}: expected 6, 10 or 13 fields, got {len(tok)}")
        w, h, pitch, yaw, roll = _floats(tok[1:6], lineno)
        box = t = None
        if len(tok) >= 10 and tok[6:10] != ["-"] * 4:
            try:
                box = BBox(*_floats(tok[6:10], lineno))
            except DataError as e:
                raise DataError(f"line {lineno}: {e}") from None
        if len(tok) == 13 and tok[10:13] != ["-"] * 3:
            t = np.array(_floats(tok[10:13], lineno))
        if w <= 0 or h <= 0:
            raise DataError(f"line {lineno}: image dims must be positive")
        out.append(GroundTruth(tok[0], w, h, EulerAngles(pitch, yaw, roll), box, t))
    return out


def match_predictions(
    gts: Sequence[GroundTruth],
    preds: Sequence[Prediction],
    mesh: Optional[FaceMesh] = None,
    style: BoxStyle = BoxStyle(),
) -> tuple[list[EvalPair], int]:
    """Pick one prediction per ground-truth face.

    With a ground-truth box, the prediction whose pose-projected box has the
    highest IoU wins; otherwise the confident prediction nearest the image
    center. Returns the pairs and the number of unmatched faces.
    """
    mesh = mesh or canonical_mesh()
    by_image: dict[str, list[Prediction]] = {}
    for p in preds:
        by_image.setdefault(p.image, []).append(p)
    pairs, unmatched = [], 0
    for g in gts:
        cands = by_image.get(g.image, [])
        if not cands:
            unmatched += 1
            continue
        k = image_intrinsics(g.width, g.height)
        boxes = [bbox_from_pose(mesh, p.pose, k, style) for p in cands]
        if g.box is not None:
            j = select_by_iou([(p.pose, b) for p, b in zip(cands, boxes)], g.box)
        else:
            j = select_by_center([(p.pose, b, p.score) for p, b in zip(cands, boxes)], g.width, g.height)
        if j is None:
            unmatched += 1
            continue
        p = cands[j]
        pairs.append(EvalPair(p.pose, g.euler, g.t, p.score, g.image))
    return pairs, unmatched


def evaluate_files(
    gt_source: PathOrStream,
    pred_source: PathOrStream,
    mesh: Optional[FaceMesh] = None,
    filter_range: Optional[tuple[float, float]] = YAW_RANGE,
) -> EvalReport:
    gts = parse_ground_truth(gt_source)
    filtered = 0
    if filter_range is not None:
        lo, hi = filter_range
        kept = [g for g in gts if all(lo <= a <= hi for a in g.euler.as_tuple())]
        filtered = len(gts) - len(kept)
        gts = kept
    pairs, unmatched = match_predictions(gts, parse_predictions(pred_source), mesh)
    return evaluate(pairs, filtered, unmatched)
