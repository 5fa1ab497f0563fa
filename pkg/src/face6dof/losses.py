"""Box matching, training losses and box voting as plain functions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DataError
from .geometry import AnyPose, BBox, Intrinsics, RawPose, project
from .pose_transform import FramedPose

BCE_EPS = 1e-7


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x1, b.x1) - max(a.x, b.x)
    ih = min(a.y1, b.y1) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_matrix(a: Sequence[BBox], b: Sequence[BBox]) -> np.ndarray:
    return np.array([[iou(x, y) for y in b] for x in a]).reshape(len(a), len(b))


@dataclass(frozen=True)
class ProposalLabel:
    p_star: int
    matched: Optional[int] = None
    iou: float = 0.0
    # IoU fell between the negative and positive thresholds
    ignore: bool = False

    def __post_init__(self):
        if self.p_star not in (0, 1):
            raise DataError("p_star must be 0 or 1")
        if (self.p_star == 1) != (self.matched is not None):
            raise DataError("a proposal is positive exactly when it has a match")


def assign_labels(
    proposals: Sequence[BBox],
    gt_boxes: Sequence[BBox],
    pos_thresh: float = 0.5,
    neg_thresh: float = 0.5,
) -> list[ProposalLabel]:
    """Match each proposal to its max-IoU ground truth (lowest index on ties)."""
    if not (0 <= neg_thresh <= pos_thresh <= 1):
        raise DataError("need 0 <= neg_thresh <= pos_thresh <= 1")
    if not gt_boxes:
        return [ProposalLabel(0) for _ in proposals]
    labels = []
    for row in iou_matrix(proposals, gt_boxes):
        j = int(np.argmax(row))  # first maximum
        best = float(row[j])
        if best >= pos_thresh:
            labels.append(ProposalLabel(1, j, best))
        else:
            labels.append(ProposalLabel(0, None, best, ignore=best >= neg_thresh))
    return labels


def bce_loss(p: float, p_star: int) -> float:
    p = min(max(float(p), BCE_EPS), 1.0 - BCE_EPS)
    return -(p_star * np.log(p) + (1 - p_star) * np.log(1.0 - p))


PoseArg = Union[AnyPose, FramedPose]


def _unframe(a: PoseArg, b: PoseArg):
    fa = a.frame if isinstance(a, FramedPose) else None
    fb = b.frame if isinstance(b, FramedPose) else None
    if fa is not None and fb is not None and fa != fb:
        raise DataError("poses are expressed in different frames")
    pa = a.pose if isinstance(a, FramedPose) else a
    pb = b.pose if isinstance(b, FramedPose) else b
    return pa, pb


def _vector(p: AnyPose) -> np.ndarray:
    if isinstance(p, RawPose):
        p = p.to_pose()
    return np.concatenate([p.rotvec, p.t])


def pose_loss(h_pred: PoseArg, h_gt: PoseArg) -> float:
    """Squared L2 distance between 6-vectors."""
    a, b = _unframe(h_pred, h_gt)
    d = _vector(a) - _vector(b)
    return float(d @ d)


def calib_loss(h_pred: PoseArg, h_gt: PoseArg, pc: np.ndarray, k: Intrinsics) -> float:
    """Entrywise L1 distance between projected calibration points."""
    a, b = _unframe(h_pred, h_gt)
    return float(np.abs(project(pc, a, k) - project(pc, b, k)).sum())


def multi_task_loss(p, p_star, h_pred, h_gt, pc, k) -> float:
    cls = bce_loss(p, p_star)
    if p_star == 0:
        return cls
    return cls + p_star * pose_loss(h_pred, h_gt) + p_star * calib_loss(h_pred, h_gt, pc, k)


# ---------------------------------------------------------------------------
# box voting


@dataclass(frozen=True)
class ScoredBox:
    box: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"score must be in [0, 1], got {self.score}")


def box_vote(boxes: Sequence[ScoredBox], iou_thresh: float = 0.5) -> list[ScoredBox]:
    """Greedy suppression where each kept box becomes the score-weighted
    mean of every input box overlapping it by at least ``iou_thresh``."""
    if not boxes:
        return []
    scores = np.array([b.score for b in boxes])
    coords = np.array([b.box.as_tuple() for b in boxes])
    order = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    ious = iou_matrix([b.box for b in boxes], [b.box for b in boxes])
    alive = np.ones(len(boxes), dtype=bool)
    out = []
    for i in order:
        if not alive[i]:
            continue
        voters = ious[i] >= iou_thresh
        voters[i] = True
        w = scores[voters]
        avg = coords[i]
        if w.sum() > 0:
            # offsets from the kept box keep identical voters exact
            avg = avg + (w[:, None] * (coords[voters] - avg)).sum(axis=0) / w.sum()
        out.append(ScoredBox(BBox(*avg), float(scores[i])))
        alive &= ~voters
    return out
