"""Exception hierarchy shared by every module.

Input problems (bad files, invalid dimensions, violated preconditions) raise
``DataError``; failures of the numerics themselves raise ``NumericalError``.
The CLI maps the two families to distinct exit codes.
"""


class Face6DoFError(Exception):
    pass


class DataError(Face6DoFError, ValueError):
    pass


class NumericalError(Face6DoFError, ArithmeticError):
    pass


class BehindCameraError(NumericalError):
    """A point has non-positive depth in the camera frame."""


class DegenerateGeometryError(NumericalError):
    """Singular matrices, collinear or coplanar point sets."""


class ConvergenceError(NumericalError):
    pass
