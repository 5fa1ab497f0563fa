"""Annotation parsing, weak pose labeling, augmentation and the pose dataset.

All geometry is bookkeeping only; pixels are never decoded.
"""
from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np

from .errors import DataError
from .face_model import FIVE_POINT_MIRROR, FaceMesh, canonical_mesh, five_point_reference
from .geometry import BBox, Pose6DoF, crop_intrinsics, image_intrinsics
from .losses import iou
from .pnp import Correspondences, SolverConfig, pose_from_landmarks, refine_pnp
from .pose_transform import local_to_global, rebase_to_subimage

FORMAT_VERSION = "v1"
LABEL_SOURCES = ("human", "weak", "none")
MIN_SIZES = (640, 672, 704, 736, 768, 800)
MAX_SIZE = 1400
MATCH_IOU = 0.5

PathOrStream = Union[str, os.PathLike, io.TextIOBase]


def _landmarks(a, n: int, what: str) -> Optional[np.ndarray]:
    if a is None:
        return None
    a = np.array(a, dtype=np.float64)
    if a.shape != (n, 2) or not np.all(np.isfinite(a)):
        raise DataError(f"{what} must be {n} finite (u, v) points, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FaceAnnotation:
    box: BBox
    landmarks5: Optional[np.ndarray] = None
    landmarks68: Optional[np.ndarray] = None
    pose: Optional[Pose6DoF] = None
    label_source: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "landmarks5", _landmarks(self.landmarks5, 5, "landmarks5"))
        object.__setattr__(self, "landmarks68", _landmarks(self.landmarks68, 68, "landmarks68"))
        if self.label_source not in LABEL_SOURCES:
            raise DataError(f"unknown label source {self.label_source!r}")
        if self.pose is not None and self.label_source == "none":
            raise DataError("a face with a pose needs a label source")


@dataclass(frozen=True, eq=False)
class ImageRecord:
    path: str
    width: float
    height: float
    faces: tuple = ()

    def __post_init__(self):
        if not (np.isfinite(self.width) and np.isfinite(self.height)) or self.width <= 0 or self.height <= 0:
            raise DataError(f"{self.path}: image dims must be positive, got {self.width}x{self.height}")
        object.__setattr__(self, "faces", tuple(self.faces))


def _open_text(source: PathOrStream):
    if hasattr(source, "read"):
        return source.read().splitlines()
    with open(source, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _numbers(tokens, lineno, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise DataError(f"line {lineno}: non-numeric {what}: {' '.join(tokens)!r}") from None


# ---------------------------------------------------------------------------
# annotation files


def parse_boxes(
    source: PathOrStream,
    image_sizes: Optional[dict] = None,
    default_size: Optional[tuple[float, float]] = None,
) -> list[ImageRecord]:
    """Read WIDER-style box annotations.

    Blocks of ``path [width height]``, a face count ``N``, then ``N`` lines
    starting with ``x y w h`` (extra columns are ignored). Image dims come
    from the path line, else ``image_sizes[path]``, else ``default_size``.
    """
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(_open_text(source))]
    lines = [(i, ln) for i, ln in lines if ln]
    records, pos = [], 0
    while pos < len(lines):
        lineno, head = lines[pos]
        tok = head.split()
        path = tok[0]
        if len(tok) == 3:
            w, h = _numbers(tok[1:], lineno, "image size")
        elif len(tok) == 1:
            size = (image_sizes or {}).get(path, default_size)
            if size is None:
                raise DataError(f"line {lineno}: no image size known for {path}")
            w, h = size
        else:
            raise DataError(f"line {lineno}: expected 'path [width height]', got {head!r}")
        if pos + 1 >= len(lines):
            raise DataError(f"line {lineno}: {path} is missing its face count")
        cnt_line, cnt = lines[pos + 1]
        try:
            n = int(cnt)
        except ValueError:
            raise DataError(f"line {cnt_line}: expected face count for {path}, got {cnt!r}") from None
        if n < 0:
            raise DataError(f"line {cnt_line}: negative face count for {path}")
        pos += 2
        faces = []
        for _ in range(n):
            if pos >= len(lines):
                raise DataError(f"{path}: declares {n} faces but the file ends after {len(faces)}")
            bl, body = lines[pos]
            tok = body.split()
            if len(tok) < 4:
                raise DataError(
                    f"{path}: declares {n} faces but line {bl} is not a box: {body!r}"
                )
            try:
                vals = [float(t) for t in tok[:4]]
            except ValueError:
                raise DataError(f"{path}: declares {n} faces but line {bl} is not a box: {body!r}") from None
            try:
                faces.append(FaceAnnotation(BBox(*vals)))
            except DataError as e:
                raise DataError(f"line {bl}: {e}") from None
            pos += 1
        # WIDER writes a placeholder box row for images without faces
        if n == 0 and pos < len(lines):
            tok = lines[pos][1].split()
            if len(tok) >= 4 and all(_is_number(t) for t in tok) and all(float(t) == 0 for t in tok[:4]):
                pos += 1
        records.append(ImageRecord(path, float(w), float(h), tuple(faces)))
    return records


def _is_number(t: str) -> bool:
    try:
        float(t)
        return True
    except ValueError:
        return False


def parse_landmarks(source: PathOrStream) -> dict[str, list[tuple[BBox, np.ndarray]]]:
    """Read 5-point landmark annotations (also used for detector output).

    ``# path`` starts an image; each following line is
    ``x y w h u1 v1 ... u5 v5`` with an optional trailing score. Landmark
    order: left eye, right eye, nose tip, left mouth corner, right mouth
    corner.
    """
    out: dict[str, list] = {}
    current = None
    for lineno, raw in enumerate(_open_text(source), start=1):
        ln = raw.strip()
        if not ln:
            continue
        if ln.startswith("#"):
            current = ln[1:].strip()
            if not current:
                raise DataError(f"line {lineno}: empty image path")
            out.setdefault(current, [])
            continue
        if current is None:
            raise DataError(f"line {lineno}: landmark row before any '# path' header")
        tok = ln.split()
        if len(tok) not in (14, 15):
            raise DataError(
                f"line {lineno}: expected a box and 5 landmark points (14 values), got {len(tok)}"
            )
        vals = _numbers(tok, lineno, "landmark row")
        try:
            box = BBox(*vals[:4])
        except DataError as e:
            raise DataError(f"line {lineno}: {e}") from None
        out[current].append((box, np.array(vals[4:14]).reshape(5, 2)))
    return out


# ---------------------------------------------------------------------------
# pose labels

LabelRoute = Literal["refined", "crop"]


def landmark_pose(
    box: BBox,
    landmarks5: np.ndarray,
    img_w: float,
    img_h: float,
    mesh: FaceMesh,
    route: LabelRoute = "refined",
    cfg: SolverConfig = SolverConfig(),
) -> Pose6DoF:
    """Global-frame pose from a face box and its five landmarks.

    The pose is first solved in the box's crop frame and carried to the image
    frame. Route ``"crop"`` stops there; ``"refined"`` polishes the result
    with a final solve against the image camera, which removes the error the
    crop-to-image conversion introduces for off-center or close-up faces.
    """
    lm = np.asarray(landmarks5, dtype=np.float64)
    k_crop = crop_intrinsics(box.w, box.h)
    h_prop = pose_from_landmarks(lm - [box.x, box.y], mesh, "five_point", k_crop, cfg).pose
    h_img = local_to_global(h_prop, box, img_w, img_h)
    if route == "crop":
        return h_img
    if route != "refined":
        raise DataError(f"unknown labeling route {route!r}")
    c = Correspondences(five_point_reference(mesh), lm)
    return refine_pnp(h_img, c, image_intrinsics(img_w, img_h), cfg).pose


def _best_match(box: BBox, candidates: Sequence[BBox]) -> tuple[Optional[int], float]:
    best, best_iou = None, -1.0
    for j, c in enumerate(candidates):
        v = iou(box, c)
        if v > best_iou:
            best, best_iou = j, v
    return best, best_iou


def weak_label(
    record: ImageRecord,
    detections: Sequence[tuple[BBox, np.ndarray]],
    mesh: Optional[FaceMesh] = None,
    route: LabelRoute = "refined",
    cfg: SolverConfig = SolverConfig(),
) -> ImageRecord:
    """Attach poses from detector boxes + landmarks to unlabeled faces.

    Each ground-truth face takes its highest-IoU detection; matches below
    0.5 IoU leave the face unlabeled. Only the pose is stored; detection
    boxes and landmarks are dropped. Faces that already carry a pose are
    left alone.
    """
    mesh = mesh or canonical_mesh()
    det_boxes = [d[0] for d in detections]
    faces = []
    for face in record.faces:
        if face.pose is not None:
            faces.append(face)
            continue
        j, v = _best_match(face.box, det_boxes)
        if j is None or v < MATCH_IOU:
            faces.append(replace(face, label_source="none"))
            continue
        box, lm = detections[j]
        pose = landmark_pose(box, lm, record.width, record.height, mesh, route, cfg)
        faces.append(replace(face, pose=pose, label_source="weak"))
    return replace(record, faces=tuple(faces))


def human_label(
    record: ImageRecord,
    annotations: Sequence[tuple[BBox, np.ndarray]],
    mesh: Optional[FaceMesh] = None,
    route: LabelRoute = "refined",
    cfg: SolverConfig = SolverConfig(),
) -> ImageRecord:
    """Poses from manually annotated landmarks, matched to faces by IoU.

    The landmarks are kept on the face; the ground-truth box is used as the
    crop frame.
    """
    mesh = mesh or canonical_mesh()
    ann_boxes = [a[0] for a in annotations]
    faces = []
    for face in record.faces:
        j, v = _best_match(face.box, ann_boxes)
        if j is None or v < MATCH_IOU:
            faces.append(face)
            continue
        lm = annotations[j][1]
        pose = landmark_pose(face.box, lm, record.width, record.height, mesh, route, cfg)
        faces.append(replace(face, landmarks5=lm, pose=pose, label_source="human"))
    return replace(record, faces=tuple(faces))


# ---------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class AugmentSpec:
    """Crop (in source pixels), then mirror, then uniform scale."""

    mirror: bool = False
    scale: float = 1.0
    crop: Optional[BBox] = None

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise DataError(f"scale must be positive, got {self.scale}")


def scale_for_min_size(width: float, height: float, min_size: float, max_size: float = MAX_SIZE) -> float:
    """Scale bringing the short side to ``min_size`` unless the long side
    would exceed ``max_size``."""
    s = min_size / min(width, height)
    if max(width, height) * s > max_size:
        s = max_size / max(width, height)
    return s


def sample_augment_spec(
    rng: np.random.Generator,
    width: float,
    height: float,
    crop_prob: float = 0.5,
    mirror_prob: float = 0.5,
    min_crop_frac: float = 0.6,
) -> AugmentSpec:
    crop = None
    w, h = width, height
    if rng.random() < crop_prob:
        cw = max(1, int(np.floor(width * rng.uniform(min_crop_frac, 1.0))))
        ch = max(1, int(np.floor(height * rng.uniform(min_crop_frac, 1.0))))
        cx = int(rng.integers(0, int(width) - cw + 1)) if width - cw >= 1 else 0
        cy = int(rng.integers(0, int(height) - ch + 1)) if height - ch >= 1 else 0
        crop = BBox(cx, cy, cw, ch)
        w, h = cw, ch
    mirror = bool(rng.random() < mirror_prob)
    min_size = MIN_SIZES[int(rng.integers(len(MIN_SIZES)))]
    return AugmentSpec(mirror=mirror, scale=scale_for_min_size(w, h, min_size), crop=crop)


def mirror_pose(pose: Pose6DoF) -> Pose6DoF:
    """Pose of the horizontally flipped face under a centered camera."""
    r, t = pose.rotvec, pose.t
    return Pose6DoF([r[0], -r[1], -r[2]], [-t[0], t[1], t[2]])


def _crop_face(face: FaceAnnotation, region: BBox, img_w, img_h) -> FaceAnnotation:
    off = np.array([region.x, region.y])
    return FaceAnnotation(
        BBox(face.box.x - region.x, face.box.y - region.y, face.box.w, face.box.h),
        None if face.landmarks5 is None else face.landmarks5 - off,
        None if face.landmarks68 is None else face.landmarks68 - off,
        None if face.pose is None else rebase_to_subimage(face.pose, region, img_w, img_h),
        face.label_source,
    )


def _mirror_face(face: FaceAnnotation, width: float, mirror68: np.ndarray) -> FaceAnnotation:
    def flip(lm, perm):
        if lm is None:
            return None
        out = lm[perm].copy()
        out[:, 0] = width - out[:, 0]
        return out

    b = face.box
    return FaceAnnotation(
        BBox(width - b.x - b.w, b.y, b.w, b.h),
        flip(face.landmarks5, FIVE_POINT_MIRROR),
        flip(face.landmarks68, mirror68),
        None if face.pose is None else mirror_pose(face.pose),
        face.label_source,
    )


def _scale_face(face: FaceAnnotation, s: float) -> FaceAnnotation:
    b = face.box
    return FaceAnnotation(
        BBox(b.x * s, b.y * s, b.w * s, b.h * s),
        None if face.landmarks5 is None else face.landmarks5 * s,
        None if face.landmarks68 is None else face.landmarks68 * s,
        face.pose,
        face.label_source,
    )


def augment(record: ImageRecord, spec: AugmentSpec, mesh: Optional[FaceMesh] = None) -> ImageRecord:
    """Apply crop, mirror and scale to every annotation of ``record``.

    Scaling leaves global poses untouched because the image camera scales
    with the image. Cropping keeps the faces whose box center lies inside
    the crop and rebases their poses to the cut-out image.
    """
    faces, w, h = list(record.faces), record.width, record.height
    if spec.crop is not None:
        c = spec.crop
        if c.x < 0 or c.y < 0 or c.x1 > w or c.y1 > h:
            raise DataError(f"crop {c.as_tuple()} exceeds the {w}x{h} image")
        kept = []
        for f in faces:
            cx, cy = f.box.center
            if c.x <= cx < c.x1 and c.y <= cy < c.y1:
                kept.append(_crop_face(f, c, w, h))
        faces, w, h = kept, c.w, c.h
    if spec.mirror:
        mirror68 = np.asarray((mesh or canonical_mesh()).mirror_index[:68])
        faces = [_mirror_face(f, w, mirror68) for f in faces]
    if spec.scale != 1.0:
        faces = [_scale_face(f, spec.scale) for f in faces]
        w, h = w * spec.scale, h * spec.scale
    return ImageRecord(record.path, w, h, tuple(faces))


# ---------------------------------------------------------------------------
# pose dataset files


def _face_to_json(f: FaceAnnotation) -> dict:
    return {
        "box": list(f.box.as_tuple()),
        "landmarks5": None if f.landmarks5 is None else f.landmarks5.tolist(),
        "landmarks68": None if f.landmarks68 is None else f.landmarks68.tolist(),
        "pose": None if f.pose is None else f.pose.as_vector().tolist(),
        "label_source": f.label_source,
    }


def record_to_line(r: ImageRecord) -> str:
    obj = {
        "version": FORMAT_VERSION,
        "image": r.path,
        "width": r.width,
        "height": r.height,
        "faces": [_face_to_json(f) for f in r.faces],
    }
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def record_from_line(line: str, lineno: int = 0) -> ImageRecord:
    where = f"line {lineno}: " if lineno else ""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise DataError(f"{where}not a JSON record ({e})") from None
    if not isinstance(obj, dict):
        raise DataError(f"{where}record must be an object")
    version = obj.get("version")
    if version != FORMAT_VERSION:
        raise DataError(f"{where}unsupported dataset version {version!r}")
    try:
        faces = []
        for fo in obj["faces"]:
            pose = fo.get("pose")
            faces.append(
                FaceAnnotation(
                    BBox(*fo["box"]),
                    fo.get("landmarks5"),
                    fo.get("landmarks68"),
                    None if pose is None else Pose6DoF.from_vector(pose),
                    fo.get("label_source", "none"),
                )
            )
        return ImageRecord(str(obj["image"]), obj["width"], obj["height"], tuple(faces))
    except (KeyError, TypeError) as e:
        raise DataError(f"{where}schema violation: {e!r}") from None
    except DataError as e:
        raise DataError(f"{where}{e}") from None


def write_dataset(records: Iterable[ImageRecord], dest: PathOrStream) -> None:
    text = "".join(record_to_line(r) + "\n" for r in records)
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def read_dataset(source: PathOrStream) -> list[ImageRecord]:
    return [
        record_from_line(ln, i)
        for i, ln in enumerate(_open_text(source), start=1)
        if ln.strip()
    ]
