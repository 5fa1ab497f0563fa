"""6DoF face pose geometry: conversions, PnP labeling, losses and evaluation."""
from .errors import (
    BehindCameraError,
    ConvergenceError,
    DataError,
    DegenerateGeometryError,
    Face6DoFError,
    NumericalError,
)
from .geometry import (
    BBox,
    EulerAngles,
    Intrinsics,
    Pose6DoF,
    RawPose,
    box_intrinsics,
    crop_intrinsics,
    euler_from_mat,
    image_intrinsics,
    mat_from_euler,
    mat_to_rot_vec,
    nearest_rotation,
    project,
    rot_vec_to_mat,
)
from .pose_transform import global_to_local, local_to_global, rebase_from_subimage, rebase_to_subimage
from .face_model import BOX_STYLES, BoxStyle, FaceMesh, bbox_from_pose, canonical_mesh, load_mesh
from .pnp import Correspondences, SolverConfig, pose_from_landmarks, solve_pnp

__version__ = "0.1.0"
