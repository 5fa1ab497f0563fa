"""Pose from 2D-3D correspondences.

Levenberg-Marquardt on the reprojection error, started from a scaled
orthographic (POSIT-style) estimate. Near-planar point sets additionally get
a homography-based start, and the lower-cost solution wins.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ConvergenceError, DataError, DegenerateGeometryError
from .face_model import FaceMesh, five_point_reference, sixty_eight_point_reference
from .geometry import (
    MIN_DEPTH,
    AnyPose,
    Intrinsics,
    Pose6DoF,
    as_points3,
    mat_to_rot_vec,
    nearest_rotation,
    project,
    rot_vec_to_mat,
    skew,
)

PLANAR_RATIO = 0.1


@dataclass(frozen=True, eq=False)
class Correspondences:
    points3: np.ndarray
    points2: np.ndarray

    def __post_init__(self):
        p3 = as_points3(self.points3)
        p2 = np.asarray(self.points2, dtype=np.float64)
        if p2.ndim != 2 or p2.shape[1] != 2:
            raise DataError(f"2D points must be (n, 2), got {p2.shape}")
        if len(p2) != len(p3):
            raise DataError(f"{len(p3)} 3D points but {len(p2)} 2D points")
        if len(p3) < 4:
            raise DataError(f"need at least 4 correspondences, got {len(p3)}")
        if not np.all(np.isfinite(p2)):
            raise DataError("2D points have non-finite coordinates")
        sv = np.linalg.svd(p3 - p3.mean(axis=0), compute_uv=False)
        if sv[1] <= 1e-9 * max(sv[0], 1e-300):
            raise DegenerateGeometryError("3D points are collinear")
        object.__setattr__(self, "points3", p3)
        object.__setattr__(self, "points2", p2)

    @property
    def n(self) -> int:
        return len(self.points3)


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    convergence_tol: float = 1e-10
    initial_damping: float = 1e-3

    def __post_init__(self):
        if self.max_iterations <= 0 or self.convergence_tol <= 0 or self.initial_damping <= 0:
            raise DataError("solver settings must be positive")


@dataclass(frozen=True, eq=False)
class PnPResult:
    pose: Pose6DoF
    rmse: float
    iterations: int
    init: str
    # RMSE after every accepted step, starting with the initial estimate
    history: list = field(default_factory=list)


def reprojection_rmse(pose: AnyPose, c: Correspondences, k: Intrinsics) -> float:
    r = project(c.points3, pose, k) - c.points2
    return float(np.sqrt(np.mean(np.sum(r * r, axis=1))))


# ---------------------------------------------------------------------------
# initial estimates (normalized image coordinates, unit focal length)


def _posit(p3: np.ndarray, xy: np.ndarray, iterations: int = 100):
    centroid = p3.mean(axis=0)
    a = np.column_stack([p3 - centroid, np.ones(len(p3))])
    a_pinv = np.linalg.pinv(a)
    eps = np.zeros(len(p3))
    for _ in range(iterations):
        sol = a_pinv @ (xy * (1.0 + eps)[:, None])
        i_vec, j_vec = sol[:3, 0], sol[:3, 1]
        ni, nj = np.linalg.norm(i_vec), np.linalg.norm(j_vec)
        if ni < 1e-12 or nj < 1e-12:
            return None
        i_hat, j_hat = i_vec / ni, j_vec / nj
        k_hat = np.cross(i_hat, j_hat)
        k_hat /= np.linalg.norm(k_hat)
        z0 = 2.0 / (ni + nj)
        new_eps = (p3 - centroid) @ k_hat / z0
        done = np.abs(new_eps - eps).max() < 1e-12
        eps = new_eps
        if done:
            break
    r = nearest_rotation(np.vstack([i_hat, j_hat, k_hat]))
    t = np.array([sol[3, 0] * z0, sol[3, 1] * z0, z0]) - r @ centroid
    return r, t


def _homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    def normalizer(p):
        m = p.mean(axis=0)
        s = np.sqrt(2.0) / max(np.mean(np.linalg.norm(p - m, axis=1)), 1e-300)
        return np.array([[s, 0, -s * m[0]], [0, s, -s * m[1]], [0, 0, 1]])

    ts, td = normalizer(src), normalizer(dst)
    s = (np.column_stack([src, np.ones(len(src))]) @ ts.T)[:, :2]
    d = (np.column_stack([dst, np.ones(len(dst))]) @ td.T)[:, :2]
    rows = []
    for (x, y), (u, v) in zip(s, d):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.array(rows))
    h = vt[-1].reshape(3, 3)
    return np.linalg.inv(td) @ h @ ts


def _planar_init(p3: np.ndarray, xy: np.ndarray):
    centroid = p3.mean(axis=0)
    _, _, vt = np.linalg.svd(p3 - centroid)
    basis = vt.T
    if np.linalg.det(basis) < 0:
        basis[:, 2] *= -1
    plane = (p3 - centroid) @ basis
    h = _homography(plane[:, :2], xy)
    scale = 2.0 / (np.linalg.norm(h[:, 0]) + np.linalg.norm(h[:, 1]))
    h = h * scale
    if h[2, 2] < 0:
        h = -h
    r_plane = nearest_rotation(np.column_stack([h[:, 0], h[:, 1], np.cross(h[:, 0], h[:, 1])]))
    r = r_plane @ basis.T
    t = h[:, 2] - r @ centroid
    return r, t


# ---------------------------------------------------------------------------
# refinement


def _residuals(r, t, p3, uv, k):
    pc = p3 @ r.T + t
    z = pc[:, 2]
    if np.any(z <= MIN_DEPTH):
        return None, pc
    proj = np.column_stack([k.f * pc[:, 0] / z + k.cx, k.f * pc[:, 1] / z + k.cy])
    return (proj - uv).reshape(-1), pc


def _jacobian(r, pc, p3, k):
    n = len(p3)
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    # d(pixel)/d(camera point)
    dproj = np.zeros((n, 2, 3))
    dproj[:, 0, 0] = k.f / z
    dproj[:, 0, 2] = -k.f * x / z**2
    dproj[:, 1, 1] = k.f / z
    dproj[:, 1, 2] = -k.f * y / z**2
    # camera point under R <- exp(d) R, t <- t + dt
    rp = p3 @ r.T
    dpc = np.zeros((n, 3, 6))
    dpc[:, :, :3] = -np.stack([skew(v) for v in rp])
    dpc[:, :, 3:] = np.eye(3)
    return np.einsum("nij,njk->nik", dproj, dpc).reshape(2 * n, 6)


def _levenberg_marquardt(r, t, p3, uv, k, cfg: SolverConfig):
    res, pc = _residuals(r, t, p3, uv, k)
    if res is None:
        return None
    cost = float(res @ res)
    lam = cfg.initial_damping
    history = [np.sqrt(cost / len(p3))]
    for it in range(1, cfg.max_iterations + 1):
        jac = _jacobian(r, pc, p3, k)
        h = jac.T @ jac
        g = jac.T @ res
        while True:
            a = h + lam * np.diag(np.diag(h))
            try:
                step = -np.linalg.solve(a, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(a, g, rcond=None)[0]
            step_norm = float(np.linalg.norm(step))
            if step_norm < cfg.convergence_tol or cost == 0.0:
                return r, t, history, it
            r_new = rot_vec_to_mat(step[:3]) @ r
            t_new = t + step[3:]
            res_new, pc_new = _residuals(r_new, t_new, p3, uv, k)
            if res_new is not None:
                cost_new = float(res_new @ res_new)
                if cost_new < cost:
                    break
            lam *= 10.0
            if lam > 1e20:
                # no representable decrease left: at the minimum
                return r, t, history, it
        r, t, res, pc, cost = r_new, t_new, res_new, pc_new, cost_new
        history.append(np.sqrt(cost / len(p3)))
        lam = max(lam / 10.0, 1e-15)
        if step_norm < cfg.convergence_tol:
            return r, t, history, it
    raise ConvergenceError(
        f"Levenberg-Marquardt did not converge in {cfg.max_iterations} iterations "
        f"(last step {step_norm:.3g})"
    )


def solve_pnp(c: Correspondences, k: Intrinsics, cfg: SolverConfig = SolverConfig()) -> PnPResult:
    p3, uv = c.points3, c.points2
    xy = np.column_stack([(uv[:, 0] - k.cx) / k.f, (uv[:, 1] - k.cy) / k.f])
    sv = np.linalg.svd(p3 - p3.mean(axis=0), compute_uv=False)
    planar = sv[2] < PLANAR_RATIO * sv[0]

    inits = []
    if sv[2] > 1e-9 * sv[0]:
        est = _posit(p3, xy)
        if est is not None:
            inits.append(("posit", est))
    if planar:
        inits.append(("homography", _planar_init(p3, xy)))

    best = None
    for name, (r0, t0) in inits:
        if t0[2] <= 0:
            continue
        out = _levenberg_marquardt(r0, t0, p3, uv, k, cfg)
        if out is None:
            continue
        r, t, history, its = out
        if best is None or history[-1] < best.rmse:
            pose = Pose6DoF(mat_to_rot_vec(nearest_rotation(r)), t)
            best = PnPResult(pose, reprojection_rmse(pose, c, k), its, name, history)
    if best is None:
        raise ConvergenceError("no initial estimate placed the points in front of the camera")
    return best


def refine_pnp(
    initial: AnyPose, c: Correspondences, k: Intrinsics, cfg: SolverConfig = SolverConfig()
) -> PnPResult:
    """Levenberg-Marquardt started from a given pose instead of POSIT."""
    r0 = nearest_rotation(initial.linear)
    out = _levenberg_marquardt(r0, np.array(initial.t, dtype=np.float64), c.points3, c.points2, k, cfg)
    if out is None:
        raise ConvergenceError("initial pose puts points behind the camera")
    r, t, history, its = out
    pose = Pose6DoF(mat_to_rot_vec(nearest_rotation(r)), t)
    return PnPResult(pose, reprojection_rmse(pose, c, k), its, "given", history)


def landmark_reference(mesh: FaceMesh, which: str) -> np.ndarray:
    if which == "five_point":
        return five_point_reference(mesh)
    if which == "sixty_eight_point":
        return sixty_eight_point_reference(mesh)
    raise DataError(f"unknown landmark variant {which!r}")


Variant = Literal["five_point", "sixty_eight_point"]


def pose_from_landmarks(
    landmarks2d,
    mesh: FaceMesh,
    which: Variant,
    k: Intrinsics,
    cfg: SolverConfig = SolverConfig(),
) -> PnPResult:
    ref = landmark_reference(mesh, which)
    lm = np.asarray(landmarks2d, dtype=np.float64)
    if lm.ndim != 2 or lm.shape != (len(ref), 2):
        raise DataError(f"{which} expects {len(ref)} landmarks, got array of shape {lm.shape}")
    return solve_pnp(Correspondences(ref, lm), k, cfg)
