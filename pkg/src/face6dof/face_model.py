"""Reference 3D face points, calibration points and boxes from poses.

Mesh coordinates follow the camera axes (x right, y down, z away from the
camera), so the identity rotation shows an upright frontal face and the
head's up direction is ``-y``. "Left" and "right" always mean image left and
image right of a frontal face.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional, Union

import numpy as np

from .errors import DataError, DegenerateGeometryError
from .geometry import AnyPose, BBox, Intrinsics, as_points3, project

ANCHOR_NAMES = (
    "nose_tip",
    "chin",
    "left_eye_outer",
    "right_eye_outer",
    "left_mouth_corner",
    "right_mouth_corner",
    "forehead_apex",
)
CALIBRATION_ANCHORS = ("nose_tip", "chin", "left_eye_outer", "right_eye_outer", "forehead_apex")
HEAD_UP = np.array([0.0, -1.0, 0.0])

# iBUG 68-point layout
LEFT_EYE = slice(36, 42)
RIGHT_EYE = slice(42, 48)
NOSE_TIP = 30
MOUTH_LEFT = 48
MOUTH_RIGHT = 54

SYMMETRY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class FaceMesh:
    points: np.ndarray
    anchors: dict
    mirror_index: np.ndarray

    @property
    def n(self) -> int:
        return len(self.points)

    def anchor(self, name: str) -> np.ndarray:
        return self.points[self.anchors[name]]


def _mirror_partners(points: np.ndarray) -> np.ndarray:
    mirrored = points * np.array([-1.0, 1.0, 1.0])
    d = np.linalg.norm(points[None, :, :] - mirrored[:, None, :], axis=2)
    partner = np.argmin(d, axis=1)
    worst = d[np.arange(len(points)), partner].max()
    if worst > SYMMETRY_TOL:
        raise DataError(f"mesh is not mirror symmetric about x=0 (max gap {worst:.3g})")
    return partner


def _parse_mesh(lines) -> tuple[np.ndarray, dict]:
    it = ((i + 1, ln.strip()) for i, ln in enumerate(lines))
    it = ((i, ln) for i, ln in it if ln and not ln.startswith("#"))
    try:
        lineno, header = next(it)
    except StopIteration:
        raise DataError("mesh file is empty") from None
    try:
        n = int(header)
    except ValueError:
        raise DataError(f"line {lineno}: expected point count, got {header!r}") from None
    pts, anchors = [], {}
    for lineno, ln in it:
        tok = ln.split()
        if len(tok) not in (3, 4):
            raise DataError(f"line {lineno}: expected 'x y z [anchor]', got {ln!r}")
        try:
            pts.append([float(v) for v in tok[:3]])
        except ValueError:
            raise DataError(f"line {lineno}: bad coordinate in {ln!r}") from None
        if len(tok) == 4:
            name = tok[3]
            if name not in ANCHOR_NAMES:
                raise DataError(f"line {lineno}: unknown anchor {name!r}")
            if name in anchors:
                raise DataError(f"line {lineno}: duplicate anchor {name!r}")
            anchors[name] = len(pts) - 1
    if len(pts) != n:
        raise DataError(f"mesh header declares {n} points but {len(pts)} were listed")
    return np.array(pts, dtype=np.float64).reshape(-1, 3), anchors


def load_mesh(source: Union[str, os.PathLike, io.TextIOBase]) -> FaceMesh:
    """Read and validate a mesh in the ASCII point format.

    ``source`` is a path or an open text stream. The first non-comment line
    is the point count, then one ``x y z [anchor_name]`` per point.
    """
    if hasattr(source, "read"):
        points, anchors = _parse_mesh(source.read().splitlines())
    else:
        with open(source, encoding="utf-8") as fh:
            points, anchors = _parse_mesh(fh.read().splitlines())
    if len(points) < 68:
        raise DataError(f"mesh needs at least 68 points, got {len(points)}")
    if not np.all(np.isfinite(points)):
        raise DataError("mesh has non-finite coordinates")
    missing = [a for a in ANCHOR_NAMES if a not in anchors]
    if missing:
        raise DataError(f"mesh is missing anchors: {', '.join(missing)}")
    centroid = points.mean(axis=0)
    if np.abs(centroid).max() > SYMMETRY_TOL:
        raise DataError(f"mesh centroid must be at the origin, got {centroid}")
    partner = _mirror_partners(points)
    points.setflags(write=False)
    partner.setflags(write=False)
    return FaceMesh(points, dict(anchors), partner)


@lru_cache(maxsize=1)
def canonical_mesh() -> FaceMesh:
    """The bundled 75-point face, unit distance between outer eye corners."""
    text = resources.files("face6dof").joinpath("data/canonical_face.txt").read_text("utf-8")
    return load_mesh(io.StringIO(text))


def default_calibration_points(mesh: FaceMesh) -> np.ndarray:
    pc = np.array([mesh.anchor(a) for a in CALIBRATION_ANCHORS])
    sv = np.linalg.svd(pc - pc.mean(axis=0), compute_uv=False)
    if sv[-1] <= 1e-6:
        raise DegenerateGeometryError("calibration points are coplanar")
    return pc


def five_point_reference(mesh: FaceMesh) -> np.ndarray:
    """3D counterparts of the 5-landmark layout.

    Order: left eye center, right eye center, nose tip, left mouth corner,
    right mouth corner.
    """
    p = mesh.points
    return np.array(
        [p[LEFT_EYE].mean(axis=0), p[RIGHT_EYE].mean(axis=0), p[NOSE_TIP], p[MOUTH_LEFT], p[MOUTH_RIGHT]]
    )


def sixty_eight_point_reference(mesh: FaceMesh) -> np.ndarray:
    return mesh.points[:68]


# landmark permutations under a horizontal flip
FIVE_POINT_MIRROR = np.array([1, 0, 2, 4, 3])


def sixty_eight_point_mirror(mesh: FaceMesh) -> np.ndarray:
    return np.asarray(mesh.mirror_index[:68])


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class BoxStyle:
    """Box padding as fractions of the tight box width/height.

    ``forehead_extend`` grows the box along the projected head-up direction
    (by that fraction of the box size), whichever way the head is tilted.
    """

    pad_left: float = 0.0
    pad_right: float = 0.0
    pad_top: float = 0.0
    pad_bottom: float = 0.0
    forehead_extend: float = 0.0

    def __post_init__(self):
        for name in ("pad_left", "pad_right", "pad_top", "pad_bottom"):
            if not getattr(self, name) >= -0.25:
                raise DataError(f"{name} must be >= -0.25")
        if not self.forehead_extend >= 0:
            raise DataError("forehead_extend must be >= 0")

    @classmethod
    def uniform(cls, pad: float, forehead_extend: float = 0.0) -> "BoxStyle":
        return cls(pad, pad, pad, pad, forehead_extend)


BOX_STYLES = {
    "tight": BoxStyle(),
    "very-tight": BoxStyle.uniform(-0.05),
    "loose": BoxStyle.uniform(0.1),
    "forehead": BoxStyle(0.02, 0.02, 0.0, 0.02, forehead_extend=0.2),
}


def projected_up_direction(pose: AnyPose, k: Intrinsics) -> np.ndarray:
    """Unit image direction of the head-up axis at the face origin.

    Zero when the up axis points straight along the line of sight.
    """
    c = np.asarray(pose.t, dtype=np.float64)
    u = pose.linear @ HEAD_UP
    # derivative of the perspective map at c along u
    d = k.f / c[2] * (u[:2] - c[:2] / c[2] * u[2])
    n = np.linalg.norm(d)
    return d / n if n > 1e-12 else np.zeros(2)


def bbox_from_pose(
    mesh: FaceMesh,
    pose: AnyPose,
    k: Intrinsics,
    style: BoxStyle = BoxStyle(),
    clip_to: Optional[tuple[float, float]] = None,
    points: Optional[np.ndarray] = None,
) -> BBox:
    """Bounding box of the projected mesh (or ``points``), then styled.

    ``clip_to=(w, h)`` clips the result to the image rectangle.
    """
    pts = mesh.points if points is None else as_points3(points)
    q = project(pts, pose, k)
    x0, y0 = q.min(axis=0)
    x1, y1 = q.max(axis=0)
    w, h = x1 - x0, y1 - y0
    x0, x1 = x0 - style.pad_left * w, x1 + style.pad_right * w
    y0, y1 = y0 - style.pad_top * h, y1 + style.pad_bottom * h
    if style.forehead_extend:
        du, dv = projected_up_direction(pose, k)
        e = style.forehead_extend
        x0 -= e * w * max(-du, 0.0)
        x1 += e * w * max(du, 0.0)
        y0 -= e * h * max(-dv, 0.0)
        y1 += e * h * max(dv, 0.0)
    if clip_to is not None:
        x0, x1 = np.clip([x0, x1], 0.0, clip_to[0])
        y0, y1 = np.clip([y0, y1], 0.0, clip_to[1])
    return BBox.from_corners(float(x0), float(y0), float(x1), float(y1))
