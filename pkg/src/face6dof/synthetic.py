"""Random poses and scenes for experiments and tests."""
from __future__ import annotations

import numpy as np

from .face_model import FaceMesh, BoxStyle, bbox_from_pose, five_point_reference
from .geometry import EulerAngles, Pose6DoF, image_intrinsics, mat_from_euler, mat_to_rot_vec, project


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Rotation vector drawn uniformly from the rotation group."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    w, v = q[0], q[1:]
    s = np.linalg.norm(v)
    if s < 1e-15:
        return np.zeros(3)
    return v / s * 2.0 * np.arctan2(s, w)


def random_face_pose(
    rng: np.random.Generator,
    yaw=(-60.0, 60.0),
    pitch=(-30.0, 30.0),
    roll=(-30.0, 30.0),
    tz=(4.0, 8.0),
    txy_frac: float = 0.1,
) -> Pose6DoF:
    e = EulerAngles(rng.uniform(*pitch), rng.uniform(*yaw), rng.uniform(*roll))
    z = rng.uniform(*tz)
    t = [rng.uniform(-txy_frac, txy_frac) * z, rng.uniform(-txy_frac, txy_frac) * z, z]
    return Pose6DoF(mat_to_rot_vec(mat_from_euler(e)), t)


def synthetic_scene(rng: np.random.Generator, mesh: FaceMesh, n_faces: int, img_w: int, img_h: int):
    """Faces scattered over an image: (pose, gt box, 5 landmarks) per face.

    Poses are global-frame; boxes are tight pose-projected boxes.
    """
    k = image_intrinsics(img_w, img_h)
    ref5 = five_point_reference(mesh)
    faces = []
    while len(faces) < n_faces:
        z = rng.uniform(8.0, 30.0)
        # aim at a random pixel, keep the face inside the frame
        u, v = rng.uniform(0.15, 0.85) * img_w, rng.uniform(0.15, 0.85) * img_h
        e = EulerAngles(rng.uniform(-30, 30), rng.uniform(-70, 70), rng.uniform(-30, 30))
        t = [(u - k.cx) / k.f * z, (v - k.cy) / k.f * z, z]
        pose = Pose6DoF(mat_to_rot_vec(mat_from_euler(e)), t)
        box = bbox_from_pose(mesh, pose, k, BoxStyle())
        if box.x < 0 or box.y < 0 or box.x1 > img_w or box.y1 > img_h:
            continue
        faces.append((pose, box, project(ref5, pose, k)))
    return faces
