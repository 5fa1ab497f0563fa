"""Monte-Carlo study of PnP rotation error under landmark pixel noise.

Sets the median-rotation-error threshold used by the test suite: faces on a
400x400 frame (f = 800), sigma = 1 px Gaussian noise on every projected
point, 1000 trials per point set.

    python scripts/pnp_noise_study.py [--trials 1000] [--sigma 1.0] [--seed 7]
"""
import argparse

import numpy as np

from face6dof.face_model import canonical_mesh, default_calibration_points, five_point_reference
from face6dof.geometry import image_intrinsics, mat_to_rot_vec, project
from face6dof.pnp import Correspondences, solve_pnp
from face6dof.synthetic import random_face_pose


def rotation_errors(points3, trials, sigma, seed):
    rng = np.random.default_rng(seed)
    k = image_intrinsics(400, 400)
    errs = np.empty(trials)
    for i in range(trials):
        pose = random_face_pose(rng)
        uv = project(points3, pose, k) + rng.normal(scale=sigma, size=(len(points3), 2))
        est = solve_pnp(Correspondences(points3, uv), k).pose
        errs[i] = np.degrees(np.linalg.norm(mat_to_rot_vec(est.linear @ pose.linear.T)))
    return errs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    mesh = canonical_mesh()
    for name, pts in [
        ("calibration points", default_calibration_points(mesh)),
        ("five landmarks", five_point_reference(mesh)),
    ]:
        e = rotation_errors(pts, args.trials, args.sigma, args.seed)
        q = np.percentile(e, [50, 90, 99])
        print(f"{name:20s} median {q[0]:.3f} deg  p90 {q[1]:.3f}  p99 {q[2]:.3f}  max {e.max():.3f}")


if __name__ == "__main__":
    main()
