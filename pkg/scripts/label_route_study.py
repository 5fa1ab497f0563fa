"""Compare the two weak-labeling routes on synthetic scenes.

"crop" solves PnP in the detection crop and converts the pose to the image
frame; "refined" additionally polishes that pose against the image camera.
Also reports the pixel gap between the crop camera and the converted pose,
which is what the crop route inherits.

    python scripts/label_route_study.py [--scenes 50] [--faces 10] [--seed 0]
"""
import argparse

import numpy as np

from face6dof.dataset import landmark_pose
from face6dof.face_model import canonical_mesh
from face6dof.geometry import crop_intrinsics, image_intrinsics, project
from face6dof.pose_transform import global_to_local, local_to_global
from face6dof.synthetic import synthetic_scene


def rot_deg(a, b):
    c = (np.trace(a @ b.T) - 1.0) / 2.0
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=50)
    ap.add_argument("--faces", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    mesh = canonical_mesh()
    rng = np.random.default_rng(args.seed)
    w, h = 1280, 960
    errs = {"crop": [], "refined": []}
    gaps = []
    for _ in range(args.scenes):
        for pose, box, lm in synthetic_scene(rng, mesh, args.faces, w, h):
            for route in errs:
                est = landmark_pose(box, lm, w, h, mesh, route)
                errs[route].append(rot_deg(est.linear, pose.linear))
            local = global_to_local(pose, box, w, h, mode="raw")
            px_crop = project(mesh.points, local, crop_intrinsics(box.w, box.h)) + [box.x, box.y]
            px_img = project(mesh.points, local_to_global(local, box, w, h, mode="raw"), image_intrinsics(w, h))
            gaps.append(np.abs(px_crop - px_img).max())
    for route, e in errs.items():
        e = np.array(e)
        print(f"{route:8s} rotation error deg: median {np.median(e):.3g}  max {e.max():.3g}")
    g = np.array(gaps)
    print(f"crop-camera vs image-camera pixel gap: median {np.median(g):.3g}  max {g.max():.3g}")


if __name__ == "__main__":
    main()
