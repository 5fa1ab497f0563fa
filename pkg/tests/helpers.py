"""Independent oracles shared by the tests."""
import numpy as np


def quat_to_mat(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rotvec_to_quat(rv):
    th = np.linalg.norm(rv)
    if th == 0:
        return np.array([1.0, 0, 0, 0])
    return np.concatenate([[np.cos(th / 2)], np.sin(th / 2) * rv / th])


def homogeneous_project(points, linear, t, k):
    """K [R | t] X followed by perspective division."""
    p = np.column_stack([points, np.ones(len(points))])
    q = (k.matrix @ np.column_stack([linear, t]) @ p.T).T
    return q[:, :2] / q[:, 2:3]


def grid_iou(a, b):
    """IoU of integer boxes by counting unit pixels."""
    def cells(bx):
        x, y, w, h = (int(v) for v in bx.as_tuple())
        return {(i, j) for i in range(x, x + w) for j in range(y, y + h)}
    ca, cb = cells(a), cells(b)
    return len(ca & cb) / len(ca | cb)


def random_rotvec(rng, max_angle=np.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return axis * rng.uniform(0, max_angle)
