import numpy as np
import pytest
from hypothesis import given, strategies as st

from face6dof.errors import DataError
from face6dof.face_model import default_calibration_points
from face6dof.geometry import BBox, Pose6DoF, RawPose, image_intrinsics, project
from face6dof.losses import (
    BCE_EPS, ScoredBox, assign_labels, bce_loss, box_vote, calib_loss, iou, iou_matrix, multi_task_loss, pose_loss,
)
from face6dof.pose_transform import CropFrame, FramedPose, ImageFrame
from face6dof.synthetic import random_face_pose

from helpers import grid_iou

int_box = st.builds(BBox, st.integers(0, 20), st.integers(0, 20), st.integers(1, 15), st.integers(1, 15))


def random_int_box(rng):
    return BBox(*rng.integers(0, 30, 2), *rng.integers(1, 20, 2))


def test_iou_examples():
    a = BBox(0, 0, 2, 2)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(5, 5, 1, 1)) == 0.0
    assert iou(a, BBox(1, 1, 2, 2)) == pytest.approx(1 / 7, abs=1e-15)


def test_iou_grid_oracle(rng):
    for _ in range(300):
        a, b = random_int_box(rng), random_int_box(rng)
        assert abs(iou(a, b) - grid_iou(a, b)) < 1e-9


@given(int_box, int_box)
def test_iou_symmetric_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


def test_assign_labels_examples():
    gt = [BBox(0, 0, 10, 10), BBox(50, 50, 10, 10)]
    lab = assign_labels([BBox(50, 50, 10, 10)], gt)[0]
    assert lab.p_star == 1 and lab.matched == 1
    # overlap 4x10 = 40, union 160: IoU 0.25 < 0.5
    lab = assign_labels([BBox(6, 0, 10, 10)], [BBox(0, 0, 10, 10)], 0.5, 0.5)[0]
    assert lab.iou == pytest.approx(40 / 160)
    assert lab.p_star == 0 and lab.matched is None
    # IoU 0.4 exactly: overlap 40 / union 100 with boxes 7x10 shifted
    lab = assign_labels([BBox(0, 0, 7, 10)], [BBox(3, 0, 7, 10)])[0]
    assert lab.iou == pytest.approx(0.4)
    assert lab.p_star == 0
    assert assign_labels([BBox(0, 0, 1, 1)], [])[0].p_star == 0


def test_assign_labels_ignore_band():
    lab = assign_labels([BBox(3, 0, 10, 10)], [BBox(0, 0, 10, 10)], 0.7, 0.3)[0]
    assert lab.iou == pytest.approx(70 / 130)
    assert lab.p_star == 0 and lab.ignore


def test_assign_labels_argmax_oracle(rng):
    props = [random_int_box(rng) for _ in range(50)]
    gts = [random_int_box(rng) for _ in range(10)]
    labels = assign_labels(props, gts)
    for p, lab in zip(props, labels):
        vals = [grid_iou(p, g) for g in gts]
        best = max(vals)
        j = next(i for i, v in enumerate(vals) if abs(v - best) < 1e-12)
        if best >= 0.5:
            assert lab.p_star == 1 and lab.matched == j
        else:
            assert lab.p_star == 0


def test_bce():
    assert bce_loss(0.5, 1) == pytest.approx(np.log(2))
    assert bce_loss(1 - BCE_EPS, 1) == pytest.approx(BCE_EPS, rel=1e-3)
    assert bce_loss(0.25, 0) == pytest.approx(-np.log(0.75))
    assert np.isfinite(bce_loss(0.0, 1)) and np.isfinite(bce_loss(1.0, 0))


def test_pose_loss(rng):
    a = Pose6DoF([0.1, 0.2, 0.3], [1, 2, 3])
    assert pose_loss(a, a) == 0
    assert pose_loss(a, Pose6DoF([0.1, 0.2, 0.3], [1, 2, 4])) == pytest.approx(1.0)
    for _ in range(20):
        p, q = random_face_pose(rng), random_face_pose(rng)
        d = p.as_vector() - q.as_vector()
        assert pose_loss(p, q) == pytest.approx(sum(x * x for x in d))
        assert pose_loss(p, q) > 0


def test_calib_loss(rng, mesh):
    pc = default_calibration_points(mesh)
    k = image_intrinsics(640, 480)
    a = Pose6DoF([0.1, 0.2, 0.05], [0.1, 0.1, 5])
    assert calib_loss(a, a, pc, k) == 0
    # adding (z_cam / f) to x_cam moves every projected point +1 px in u
    du = np.array([1 / k.f, 0, 0])
    moved = RawPose(a.linear + np.outer(du, a.linear[2]), a.t + du * a.t[2])
    assert calib_loss(moved, a, pc, k) == pytest.approx(5.0, rel=1e-9)
    for _ in range(20):
        p, q = random_face_pose(rng), random_face_pose(rng)
        oracle = np.abs(project(pc, p, k) - project(pc, q, k)).sum()
        assert calib_loss(p, q, pc, k) == pytest.approx(oracle)


def test_multi_task_gating(rng, mesh):
    pc = default_calibration_points(mesh)
    k = image_intrinsics(640, 480)
    for _ in range(50):
        p = rng.uniform()
        # even unusable pose arguments are never touched when p* = 0
        assert multi_task_loss(p, 0, None, None, pc, k) == bce_loss(p, 0)
        a, b = random_face_pose(rng), random_face_pose(rng)
        assert multi_task_loss(p, 0, a, b, pc, k) == bce_loss(p, 0)
        total = bce_loss(p, 1) + pose_loss(a, b) + calib_loss(a, b, pc, k)
        assert multi_task_loss(p, 1, a, b, pc, k) == pytest.approx(total)
    a = random_face_pose(rng)
    assert multi_task_loss(1 - BCE_EPS, 1, a, a, pc, k) == pytest.approx(0, abs=1e-6)


def test_frame_mismatch():
    p = Pose6DoF([0, 0, 0], [0, 0, 1])
    with pytest.raises(DataError):
        pose_loss(FramedPose(p, ImageFrame(10, 10)), FramedPose(p, CropFrame(BBox(0, 0, 5, 5), 10, 10)))
    assert pose_loss(FramedPose(p, ImageFrame(10, 10)), FramedPose(p, ImageFrame(10, 10))) == 0


def test_box_vote_examples():
    assert box_vote([]) == []
    one = ScoredBox(BBox(1, 2, 3, 4), 0.7)
    assert box_vote([one])[0].box == one.box
    same = box_vote([ScoredBox(BBox(1.1, 2.3, 3.7, 4.9), 0.8), ScoredBox(BBox(1.1, 2.3, 3.7, 4.9), 0.2)])
    assert len(same) == 1 and same[0].box == BBox(1.1, 2.3, 3.7, 4.9) and same[0].score == 0.8
    a, b = np.array([0, 0, 10, 10.0]), np.array([1, 1, 10, 10.0])
    out = box_vote([ScoredBox(BBox(*a), 0.6), ScoredBox(BBox(*b), 0.4)])
    assert len(out) == 1
    assert np.allclose(out[0].box.as_tuple(), [0.4, 0.4, 10, 10], atol=1e-12)


def test_box_vote_properties(rng):
    boxes = [ScoredBox(random_int_box(rng), float(rng.uniform())) for _ in range(40)]
    out = box_vote(boxes)
    assert len(out) <= len(boxes)
    scores = {b.score for b in boxes}
    assert all(o.score in scores for o in out)


def test_iou_matrix_shape():
    assert iou_matrix([], [BBox(0, 0, 1, 1)]).shape == (0, 1)
