"""Rigid-body poses, axis-angle rotations and low-discrepancy point sets.

Rotations are stored as 3x3 orthonormal matrices, poses as rotation +
translation.  Base-pose parameter vectors are plain numpy arrays of length
3 (position offset) or 6 (position offset + axis-angle orientation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ROTATION_TOL = 1e-9

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def _as_matrix(m) -> np.ndarray:
    a = np.array(m, dtype=float).reshape(3, 3)
    a.setflags(write=False)
    return a


def _as_vector(v) -> np.ndarray:
    a = np.array(v, dtype=float).reshape(3)
    a.setflags(write=False)
    return a


def check_rotation(r: np.ndarray, tol: float = ROTATION_TOL) -> None:
    """Raise ValueError unless r is a proper rotation matrix."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        raise ValueError("rotation must be a finite 3x3 matrix")
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotation (3x3) and translation (3,) in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_matrix(self.rotation))
        object.__setattr__(self, "translation", _as_vector(self.translation))
        check_rotation(self.rotation)
        if not np.all(np.isfinite(self.translation)):
            raise ValueError("translation must be finite")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def to_dict(self) -> dict:
        return {
            "rotation": [float(x) for x in self.rotation.ravel()],
            "translation": [float(x) for x in self.translation],
        }

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(np.array(d["rotation"], dtype=float).reshape(3, 3),
                    d["translation"])

    def approx_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        return (np.max(np.abs(self.rotation - other.rotation)) <= tol
                and np.max(np.abs(self.translation - other.translation)) <= tol)


@dataclass(frozen=True)
class DistanceWeights:
    """Weight trading radians against meters in the pose distance."""

    lambda_rot: float = 0.5

    def __post_init__(self):
        if not (self.lambda_rot >= 0.0):
            raise ValueError("lambda_rot must be >= 0")


def translate(x: float, y: float, z: float) -> Pose:
    return Pose(np.eye(3), (x, y, z))


def rotx(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def roty(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotz(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def compose(a: Pose, b: Pose) -> Pose:
    """Homogeneous-transform product a * b."""
    return Pose(a.rotation @ b.rotation,
                a.rotation @ b.translation + a.translation)


def invert(p: Pose) -> Pose:
    rt = p.rotation.T
    return Pose(rt, -rt @ p.translation)


def axis_angle_to_rotation(v) -> np.ndarray:
    """Rodrigues formula; the angle is the norm of v, ||v|| = 0 gives identity."""
    v = np.asarray(v, dtype=float).reshape(3)
    angle = float(np.linalg.norm(v))
    if angle < 1e-14:
        return np.eye(3)
    axis = v / angle
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def rotation_to_axis_angle(r: np.ndarray) -> np.ndarray:
    """Canonical axis-angle vector with norm in [0, pi]."""
    r = np.asarray(r, dtype=float)
    c = max(-1.0, min(1.0, (np.trace(r) - 1.0) / 2.0))
    angle = math.acos(c)
    skew = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if angle < 1e-9:
        return 0.5 * skew
    s = math.sin(angle)
    if s > 1e-6:
        return (0.5 * angle / s) * skew
    # angle near pi: (r + I) = 2 * outer(axis, axis); take its largest column
    b = r + np.eye(3)
    col = b[:, int(np.argmax(np.linalg.norm(b, axis=0)))]
    axis = col / np.linalg.norm(col)
    if axis @ skew < 0.0:
        axis = -axis
    return axis * angle


def rotation_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle between two rotations, in [0, pi]."""
    c = (np.trace(np.asarray(a).T @ np.asarray(b)) - 1.0) / 2.0
    return math.acos(max(-1.0, min(1.0, c)))


def pose_distance(a: Pose, b: Pose, w: DistanceWeights = DistanceWeights()) -> float:
    """Translation distance plus weighted geodesic rotation angle."""
    dt = float(np.linalg.norm(a.translation - b.translation))
    return dt + w.lambda_rot * rotation_angle(a.rotation, b.rotation)


def pose_from_params(b) -> Pose:
    """Map a length-3 or length-6 parameter vector to a pose.

    Length 3 yields a pure translation; length 6 additionally applies the
    axis-angle rotation encoded in entries 4..6.
    """
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] == 3:
        return Pose(np.eye(3), b)
    if b.shape[0] == 6:
        return Pose(axis_angle_to_rotation(b[3:]), b[:3])
    raise ValueError(f"parameter vector must have length 3 or 6, got {b.shape[0]}")


def wrap_axis_angle(v) -> np.ndarray:
    """Wrap an axis-angle vector to the representative with norm <= pi."""
    v = np.asarray(v, dtype=float).reshape(3)
    angle = float(np.linalg.norm(v))
    if angle <= math.pi or angle < 1e-14:
        return v.copy()
    wrapped = math.remainder(angle, 2.0 * math.pi)  # in (-pi, pi]
    return v * (wrapped / angle)


def _radical_inverse(i: int, base: int) -> float:
    inv = 0.0
    f = 1.0 / base
    while i > 0:
        inv += f * (i % base)
        i //= base
        f /= base
    return inv


def hammersley_points(n: int, dim: int) -> np.ndarray:
    """Hammersley set: first coordinate i/n, the rest radical inverses."""
    if n < 1 or dim < 1:
        raise ValueError("n and dim must be >= 1")
    if dim - 1 > len(_PRIMES):
        raise ValueError(f"dim must be <= {len(_PRIMES) + 1}")
    pts = np.empty((n, dim))
    for i in range(n):
        pts[i, 0] = i / n
        for d in range(1, dim):
            pts[i, d] = _radical_inverse(i, _PRIMES[d - 1])
    return pts


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation on SO(3) via a uniform unit quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_axis_angle(rng: np.random.Generator) -> np.ndarray:
    """Axis-angle vector of a uniform rotation, with norm <= pi."""
    return rotation_to_axis_angle(random_rotation(rng))
