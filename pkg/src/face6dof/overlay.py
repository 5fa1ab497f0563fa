"""Deterministic SVG overlays of ground-truth boxes and projected poses."""
from __future__ import annotations

import os
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import ImageRecord
from .face_model import BoxStyle, FaceMesh, bbox_from_pose, canonical_mesh, default_calibration_points
from .geometry import AnyPose, image_intrinsics, project

GT_COLOR = "#2ca02c"
POSE_COLOR = "#d62728"
POINT_COLOR = "#1f77b4"


def _n(v: float) -> str:
    # fixed precision keeps output bytes stable across platforms
    return f"{float(v):.3f}"


def _rect(b, color: str) -> str:
    return (
        f'<rect x="{_n(b.x)}" y="{_n(b.y)}" width="{_n(b.w)}" height="{_n(b.h)}" '
        f'fill="none" stroke="{color}" stroke-width="2"/>'
    )


def render_overlay(
    record: ImageRecord,
    poses: Sequence[AnyPose],
    mesh: Optional[FaceMesh] = None,
    style: BoxStyle = BoxStyle(),
) -> str:
    """SVG text sized to the image: gt boxes, pose boxes, calibration points."""
    mesh = mesh or canonical_mesh()
    k = image_intrinsics(record.width, record.height)
    pc = default_calibration_points(mesh)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_n(record.width)}" '
        f'height="{_n(record.height)}" viewBox="0 0 {_n(record.width)} {_n(record.height)}">',
        f"<title>{_escape(record.path)}</title>",
        '<g class="gt">',
    ]
    parts += [_rect(f.box, GT_COLOR) for f in record.faces]
    parts.append("</g>")
    parts.append('<g class="poses">')
    for pose in poses:
        parts.append(_rect(bbox_from_pose(mesh, pose, k, style), POSE_COLOR))
        for u, v in project(pc, pose, k):
            parts.append(f'<circle cx="{_n(u)}" cy="{_n(v)}" r="3" fill="{POINT_COLOR}"/>')
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_overlay(path: Union[str, os.PathLike], svg: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
