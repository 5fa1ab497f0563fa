"""Regenerate the bundled canonical face point set.

Points are laid out in the iBUG 68-landmark order followed by seven forehead
points. Coordinates are authored in millimetres with y up and the nose
pointing at the viewer, then flipped into the camera convention (y down,
z away from the camera), centered on the centroid and scaled so the outer
eye corners are one unit apart.

    python scripts/make_canonical_mesh.py > src/face6dof/data/canonical_face.txt
"""
import sys

import numpy as np

# image-left half of the face (x <= 0); mirrored partners are generated
JAW = [
    (-70, 30, -90), (-69, 12, -88), (-67, -6, -85), (-63, -24, -80),
    (-57, -40, -72), (-48, -54, -60), (-37, -65, -47), (-21, -73, -36),
]
CHIN = (0, -76, -32)
BROW = [(-57, 55, -35), (-47, 62, -22), (-35, 65, -14), (-23, 63, -9), (-11, 58, -6)]
NOSE_BRIDGE = [(0, 45, -12), (0, 32, -7), (0, 18, -2), (0, 0, 0)]
NOSTRILS = [(-14, -10, -14), (-7, -13, -10), (0, -14, -8)]
# 36..41: outer corner, upper lid x2, inner corner, lower lid x2
EYE = [(-45, 38, -27), (-37, 43, -22), (-26, 43, -21), (-17, 38, -22), (-26, 34, -21), (-37, 34, -22)]
MOUTH_OUTER_TOP = [(-25, -30, -22), (-16, -25, -15), (-7, -23, -11), (0, -24, -10)]
MOUTH_OUTER_BOTTOM = [(-16, -37, -16), (-7, -40, -12), (0, -41, -11)]
MOUTH_INNER_TOP = [(-20, -30, -19), (-7, -28, -13), (0, -28, -12)]
MOUTH_INNER_BOTTOM = [(-7, -32, -13), (0, -32, -12)]
FOREHEAD = [(-60, 72, -62), (-45, 86, -42), (-25, 96, -27)]
FOREHEAD_APEX = (0, 100, -22)


def mirror(p):
    return (-p[0], p[1], p[2])


def build():
    pts = []
    pts += JAW + [CHIN] + [mirror(p) for p in reversed(JAW)]              # 0-16
    pts += BROW + [mirror(p) for p in reversed(BROW)]                     # 17-26
    pts += NOSE_BRIDGE                                                     # 27-30
    pts += NOSTRILS + [mirror(p) for p in reversed(NOSTRILS[:2])]         # 31-35
    pts += EYE                                                             # 36-41
    left = [mirror(EYE[i]) for i in (3, 2, 1, 0, 5, 4)]                    # 42-47
    pts += left
    pts += MOUTH_OUTER_TOP + [mirror(p) for p in reversed(MOUTH_OUTER_TOP[:3])]  # 48-54
    pts += [mirror(p) for p in MOUTH_OUTER_BOTTOM[:2]] + [MOUTH_OUTER_BOTTOM[2]]  # 55-57
    pts += list(reversed(MOUTH_OUTER_BOTTOM[:2]))                         # 58-59
    pts += MOUTH_INNER_TOP + [mirror(p) for p in reversed(MOUTH_INNER_TOP[:2])]  # 60-64
    pts += [mirror(MOUTH_INNER_BOTTOM[0]), MOUTH_INNER_BOTTOM[1], MOUTH_INNER_BOTTOM[0]]  # 65-67
    pts += FOREHEAD + [FOREHEAD_APEX] + [mirror(p) for p in reversed(FOREHEAD)]  # 68-74
    assert len(pts) == 75

    p = np.array(pts, dtype=np.float64)
    p[:, 1] *= -1.0
    p[:, 2] *= -1.0
    # x is symmetric by construction; centering it numerically would break
    # exact mirror pairs
    p[:, 1:] -= p[:, 1:].mean(axis=0)
    p /= np.linalg.norm(p[36] - p[45])
    anchors = {
        30: "nose_tip", 8: "chin", 36: "left_eye_outer", 45: "right_eye_outer",
        48: "left_mouth_corner", 54: "right_mouth_corner", 71: "forehead_apex",
    }
    return p, anchors


def main(out=sys.stdout):
    p, anchors = build()
    out.write(f"{len(p)}\n")
    for i, (x, y, z) in enumerate(p):
        line = f"{float(x)!r} {float(y)!r} {float(z)!r}"
        if i in anchors:
            line += f" {anchors[i]}"
        out.write(line + "\n")


if __name__ == "__main__":
    main()
