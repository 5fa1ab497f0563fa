"""Pose conversion between crop (proposal) frames and the full-image frame.

A crop-frame pose is expressed for ``crop_intrinsics(w_bb, h_bb)``; a global
pose for ``image_intrinsics(w, h)``. Conversion runs in two steps:

* rescale: ``t_z`` is multiplied by ``(w + h) / (w_bb + h_bb)``, moving the
  pose from the crop camera to ``box_intrinsics`` (image focal length,
  principal point at the box center);
* translate: the principal point moves from the box center to the image
  center, ``t' = K_img^-1 K_box t`` and ``R' = K_img^-1 K_box R``.

The translation step preserves every projected pixel exactly, but ``R'`` is
a shear times a rotation. ``mode="raw"`` keeps that matrix (``RawPose``);
``mode="orthogonalized"`` (the default) snaps it to the nearest rotation.
The rescale step only touches ``t_z``, so it is exact for points at the
face's depth and approximate elsewhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .errors import DataError
from .geometry import (
    AnyPose,
    BBox,
    Intrinsics,
    Pose6DoF,
    RawPose,
    box_intrinsics,
    crop_intrinsics,
    image_intrinsics,
    mat_to_rot_vec,
    nearest_rotation,
)

Mode = Literal["orthogonalized", "raw"]
MODES = ("orthogonalized", "raw")


@dataclass(frozen=True)
class CropFrame:
    box: BBox
    img_w: float
    img_h: float


@dataclass(frozen=True)
class ImageFrame:
    img_w: float
    img_h: float


@dataclass(frozen=True, eq=False)
class FramedPose:
    pose: AnyPose
    frame: Union[CropFrame, ImageFrame]

    def intrinsics(self) -> Intrinsics:
        if isinstance(self.frame, CropFrame):
            return crop_intrinsics(self.frame.box.w, self.frame.box.h)
        return image_intrinsics(self.frame.img_w, self.frame.img_h)


def _check(pose: AnyPose, b: BBox, img_w, img_h, mode):
    if mode not in MODES:
        raise DataError(f"unknown conversion mode {mode!r}")
    if not (img_w > 0 and img_h > 0):
        raise DataError(f"image dims must be positive, got {img_w}x{img_h}")
    if pose.t[2] <= 0:
        raise DataError(f"t_z must be positive, got {pose.t[2]}")


def _finish(linear: np.ndarray, t: np.ndarray, mode: Mode) -> AnyPose:
    if mode == "raw":
        return RawPose(linear, t)
    return Pose6DoF(mat_to_rot_vec(nearest_rotation(linear)), t)


def _retarget(linear, t, k_from: Intrinsics, k_to: Intrinsics):
    # same focal length, different principal point: pixels are preserved
    a = k_to.inverse_matrix @ k_from.matrix
    return a @ linear, a @ t


def translate_principal_point(
    pose: AnyPose, b: BBox, img_w: float, img_h: float, mode: Mode = "orthogonalized"
) -> AnyPose:
    """Box-centered (``box_intrinsics``) pose to image-centered pose; exact."""
    _check(pose, b, img_w, img_h, mode)
    linear, t = _retarget(
        pose.linear, pose.t, box_intrinsics(b, img_w, img_h), image_intrinsics(img_w, img_h)
    )
    return _finish(linear, t, mode)


def local_to_global(
    h_prop: AnyPose, b: BBox, img_w: float, img_h: float, mode: Mode = "orthogonalized"
) -> AnyPose:
    """Crop-frame pose to image-frame pose: rescale, then translate."""
    _check(h_prop, b, img_w, img_h, mode)
    t = np.array(h_prop.t)
    t[2] = t[2] * (img_w + img_h) / (b.w + b.h)
    linear, t = _retarget(
        h_prop.linear, t, box_intrinsics(b, img_w, img_h), image_intrinsics(img_w, img_h)
    )
    return _finish(linear, t, mode)


def global_to_local(
    h_img: AnyPose, b: BBox, img_w: float, img_h: float, mode: Mode = "orthogonalized"
) -> AnyPose:
    """Image-frame pose to crop-frame pose: translate, then rescale."""
    _check(h_img, b, img_w, img_h, mode)
    linear, t = _retarget(
        h_img.linear, h_img.t, image_intrinsics(img_w, img_h), box_intrinsics(b, img_w, img_h)
    )
    t[2] = t[2] * (b.w + b.h) / (img_w + img_h)
    return _finish(linear, t, mode)


def intermediate_pose(h_prop: AnyPose, b: BBox, img_w: float, img_h: float) -> RawPose:
    """Crop-frame pose after the rescale step only, for ``box_intrinsics``."""
    _check(h_prop, b, img_w, img_h, "raw")
    t = np.array(h_prop.t)
    t[2] = t[2] * (img_w + img_h) / (b.w + b.h)
    return RawPose(h_prop.linear, t)


def rebase_to_subimage(
    h_img: AnyPose, region: BBox, img_w: float, img_h: float, mode: Mode = "orthogonalized"
) -> AnyPose:
    """Re-express a global pose for ``region`` cut out as a new image.

    The region's crop camera equals the image camera of the cut-out image.
    In raw mode the depth row of the linear part is rescaled together with
    ``t_z``, which makes reprojection into the cut-out exact (pixels shift by
    ``-region.x, -region.y``). Orthogonalized mode keeps the rotation and
    only rescales ``t_z``.
    """
    _check(h_img, region, img_w, img_h, mode)
    linear, t = _retarget(
        h_img.linear, h_img.t, image_intrinsics(img_w, img_h), box_intrinsics(region, img_w, img_h)
    )
    s = (region.w + region.h) / (img_w + img_h)
    t[2] *= s
    if mode == "raw":
        linear[2] *= s
    return _finish(linear, t, mode)


def rebase_from_subimage(
    h_sub: AnyPose, region: BBox, img_w: float, img_h: float, mode: Mode = "orthogonalized"
) -> AnyPose:
    """Inverse of ``rebase_to_subimage``."""
    _check(h_sub, region, img_w, img_h, mode)
    linear, t = np.array(h_sub.linear), np.array(h_sub.t)
    s = (img_w + img_h) / (region.w + region.h)
    t[2] *= s
    if mode == "raw":
        linear[2] *= s
    linear, t = _retarget(
        linear, t, box_intrinsics(region, img_w, img_h), image_intrinsics(img_w, img_h)
    )
    return _finish(linear, t, mode)
