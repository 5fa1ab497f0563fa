"""Rotation conversions, pinhole intrinsics and projection.

Camera frame: x right, y down, z forward. Euler angles are Tait-Bryan with
``R = Rz(roll) @ Ry(yaw) @ Rx(pitch)``, reported in degrees.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .errors import BehindCameraError, DataError, DegenerateGeometryError

ORTHONORMAL_TOL = 1e-6
MIN_DEPTH = 1e-9


def _vec3(v, name: str) -> np.ndarray:
    a = np.array(v, dtype=np.float64).reshape(-1)
    if a.shape != (3,):
        raise DataError(f"{name} must have 3 components, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} has non-finite components: {a}")
    a.setflags(write=False)
    return a


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _vee(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


# ---------------------------------------------------------------------------
# rotations


def rot_vec_to_mat(rv) -> np.ndarray:
    """Rodrigues formula. The zero vector maps to the identity."""
    rv = _vec3(rv, "rotation vector")
    theta = float(np.linalg.norm(rv))
    k = skew(rv)
    if theta < 1e-8:
        # second-order Taylor expansion is exact to double precision here
        return np.eye(3) + k + 0.5 * (k @ k)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * (k @ k)


def _canonical_axis(axis: np.ndarray) -> np.ndarray:
    # at exactly pi, +axis and -axis describe the same rotation
    for c in axis:
        if abs(c) > 1e-12:
            return axis if c > 0 else -axis
    return axis


def check_rotation(m, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise DataError(f"rotation matrix must be 3x3, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DataError("rotation matrix has non-finite entries")
    err = np.abs(m.T @ m - np.eye(3)).max()
    if err > tol or abs(np.linalg.det(m) - 1.0) > tol:
        raise DataError(
            f"matrix is not a rotation (orthonormality error {err:.3g}); "
            "orthogonalize it with nearest_rotation first"
        )
    return m


def mat_to_rot_vec(m) -> np.ndarray:
    """Canonical axis-angle vector with angle in [0, pi]."""
    m = check_rotation(m)
    w = 0.5 * _vee(m)  # sin(theta) * axis
    s = float(np.linalg.norm(w))
    c = 0.5 * (np.trace(m) - 1.0)
    theta = float(np.arctan2(s, c))
    if theta < 1e-8:
        return w
    if c > -0.9:
        return w * (theta / s)
    # near pi the antisymmetric part vanishes; read the axis off the
    # symmetric part, (M + M^T)/2 - cI = (1 - c) a a^T
    sym = 0.5 * (m + m.T) - c * np.eye(3)
    col = int(np.argmax(np.diag(sym)))
    axis = sym[:, col] / np.sqrt(sym[col, col] * (1.0 - c))
    axis /= np.linalg.norm(axis)
    if s > 1e-12:
        axis = axis if axis @ w >= 0 else -axis
    else:
        axis = _canonical_axis(axis)
    return axis * theta


def nearest_rotation(g) -> np.ndarray:
    """Rotation closest to ``g`` in Frobenius norm (orthogonal Procrustes)."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (3, 3) or not np.all(np.isfinite(g)):
        raise DataError("expected a finite 3x3 matrix")
    if abs(np.linalg.det(g)) <= 1e-12:
        raise DegenerateGeometryError("cannot orthogonalize a singular matrix")
    u, _, vt = np.linalg.svd(g)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


# ---------------------------------------------------------------------------
# Euler angles


@dataclass(frozen=True)
class EulerAngles:
    pitch: float
    yaw: float
    roll: float
    gimbal_lock: bool = False

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.pitch, self.yaw, self.roll)


def _wrap_deg(a: float) -> float:
    # into (-180, 180]
    a = float(np.fmod(a, 360.0))
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


def mat_from_euler(e: EulerAngles) -> np.ndarray:
    p, y, r = np.radians([e.pitch, e.yaw, e.roll])
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    cr, sr = np.cos(r), np.sin(r)
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return rz @ ry @ rx


def euler_from_mat(m, lock_tol_deg: float = 1e-6) -> EulerAngles:
    """Inverse of ``mat_from_euler``; roll is pinned to 0 at gimbal lock."""
    m = check_rotation(m)
    cos_yaw = float(np.hypot(m[0, 0], m[1, 0]))
    yaw = float(np.degrees(np.arctan2(-m[2, 0], cos_yaw)))
    if 90.0 - abs(yaw) < lock_tol_deg:
        pitch = float(np.degrees(np.arctan2(-m[1, 2], m[1, 1])))
        return EulerAngles(_wrap_deg(pitch), yaw, 0.0, gimbal_lock=True)
    pitch = float(np.degrees(np.arctan2(m[2, 1], m[2, 2])))
    roll = float(np.degrees(np.arctan2(m[1, 0], m[0, 0])))
    return EulerAngles(_wrap_deg(pitch), _wrap_deg(yaw), _wrap_deg(roll))


# ---------------------------------------------------------------------------
# poses


@dataclass(frozen=True, eq=False)
class Pose6DoF:
    """Rotation vector plus translation, both as length-3 arrays."""

    rotvec: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotvec", _vec3(self.rotvec, "rotation vector"))
        object.__setattr__(self, "t", _vec3(self.t, "translation"))

    @classmethod
    def from_vector(cls, h) -> "Pose6DoF":
        h = np.asarray(h, dtype=np.float64).reshape(-1)
        if h.shape != (6,):
            raise DataError(f"pose vector must have 6 entries, got {h.shape}")
        return cls(h[:3], h[3:])

    @classmethod
    def from_matrix(cls, m, t) -> "Pose6DoF":
        return cls(mat_to_rot_vec(m), t)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.rotvec, self.t])

    @cached_property
    def linear(self) -> np.ndarray:
        return rot_vec_to_mat(self.rotvec)

    def __repr__(self):
        r = ", ".join(f"{v:.6g}" for v in self.rotvec)
        t = ", ".join(f"{v:.6g}" for v in self.t)
        return f"Pose6DoF(rotvec=[{r}], t=[{t}])"


@dataclass(frozen=True, eq=False)
class RawPose:
    """Extrinsics whose linear part is a general invertible matrix.

    Produced by the exact ("raw") frame conversions; projects like any pose.
    """

    linear: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        m = np.array(self.linear, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise DataError("raw pose needs a finite 3x3 linear part")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateGeometryError("raw pose linear part is singular")
        m.setflags(write=False)
        object.__setattr__(self, "linear", m)
        object.__setattr__(self, "t", _vec3(self.t, "translation"))

    def to_pose(self) -> Pose6DoF:
        return Pose6DoF(mat_to_rot_vec(nearest_rotation(self.linear)), self.t)


AnyPose = Union[Pose6DoF, RawPose]


# ---------------------------------------------------------------------------
# intrinsics and boxes


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(np.isfinite(vals)):
            raise DataError(f"box has non-finite values: {vals}")
        if self.w <= 0 or self.h <= 0:
            raise DataError(f"box dims must be positive, got w={self.w} h={self.h}")
        for name, v in zip("xywh", vals):
            object.__setattr__(self, name, float(v))

    @classmethod
    def from_corners(cls, x0, y0, x1, y1) -> "BBox":
        return cls(x0, y0, x1 - x0, y1 - y0)

    @property
    def x1(self) -> float:
        return self.x + self.w

    @property
    def y1(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class Intrinsics:
    f: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (np.isfinite(self.f) and self.f > 0):
            raise DataError(f"focal length must be positive, got {self.f}")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise DataError("principal point must be finite")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.cx], [0.0, self.f, self.cy], [0.0, 0.0, 1.0]])

    @property
    def inverse_matrix(self) -> np.ndarray:
        f = self.f
        return np.array(
            [[1.0 / f, 0.0, -self.cx / f], [0.0, 1.0 / f, -self.cy / f], [0.0, 0.0, 1.0]]
        )


def _positive_dims(w, h, what: str):
    if not (np.isfinite(w) and np.isfinite(h)) or w <= 0 or h <= 0:
        raise DataError(f"{what} dims must be positive, got {w}x{h}")


def crop_intrinsics(w_bb: float, h_bb: float) -> Intrinsics:
    """Camera of a crop in its own pixel coordinates: f = w + h, centered."""
    _positive_dims(w_bb, h_bb, "crop")
    return Intrinsics(float(w_bb + h_bb), w_bb / 2.0, h_bb / 2.0)


def box_intrinsics(b: BBox, img_w: float, img_h: float) -> Intrinsics:
    """Image-focal camera whose principal point sits at the box center."""
    _positive_dims(img_w, img_h, "image")
    return Intrinsics(float(img_w + img_h), b.x + b.w / 2.0, b.y + b.h / 2.0)


def image_intrinsics(img_w: float, img_h: float) -> Intrinsics:
    _positive_dims(img_w, img_h, "image")
    return Intrinsics(float(img_w + img_h), img_w / 2.0, img_h / 2.0)


# ---------------------------------------------------------------------------
# projection


def as_points3(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if p.ndim == 1:
        p = p.reshape(1, -1)
    if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 1:
        raise DataError(f"expected an (n, 3) point array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DataError("point set has non-finite coordinates")
    return p


def to_camera(points, pose: AnyPose) -> np.ndarray:
    p = as_points3(points)
    return p @ pose.linear.T + pose.t


def project(points, pose: AnyPose, k: Intrinsics) -> np.ndarray:
    """Pinhole projection of (n, 3) model points to (n, 2) pixels."""
    pc = to_camera(points, pose)
    z = pc[:, 2]
    if np.any(z <= MIN_DEPTH):
        bad = int(np.argmin(z))
        raise BehindCameraError(f"point {bad} has camera depth {z[bad]:.6g}")
    return np.column_stack([k.f * pc[:, 0] / z + k.cx, k.f * pc[:, 1] / z + k.cy])
