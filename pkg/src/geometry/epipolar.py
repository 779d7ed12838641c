"""
Two-view epipolar geometry: fundamental matrices and epipolar lines.
"""

import numpy as np

from src.errors import DegenerateGeometryError
from .cameras import CameraIntrinsics, CameraPose, EpipolarLine, relative_pose

BASELINE_EPS = 1e-12
LINE_EPS = 1e-12


def skew(t: np.ndarray) -> np.ndarray:
    """Cross-product matrix [t]x."""
    tx, ty, tz = np.asarray(t, dtype=np.float64)
    return np.array([[0.0, -tz, ty], [tz, 0.0, -tx], [-ty, tx, 0.0]])


def fundamental_matrix(intr_a: CameraIntrinsics, pose_a: CameraPose,
                       intr_b: CameraIntrinsics, pose_b: CameraPose) -> np.ndarray:
    """
    Fundamental matrix mapping pixels of view A to epipolar lines in view B.

    Satisfies x_b^T F x_a = 0 for corresponding homogeneous pixels and is
    returned with unit Frobenius norm.

    Raises:
        DegenerateGeometryError: if the camera centers coincide.
    """
    baseline = np.linalg.norm(pose_b.center - pose_a.center)
    scale = max(1.0, np.linalg.norm(pose_a.center), np.linalg.norm(pose_b.center))
    if baseline <= BASELINE_EPS * scale:
        raise DegenerateGeometryError("Camera centers coincide; epipolar geometry is undefined")
    # X_b = R X_a + t, i.e. the pose of camera A seen from camera B
    rel = relative_pose(pose_b, pose_a)
    essential = skew(rel.translation) @ rel.rotation
    f = intr_b.inverse_matrix.T @ essential @ intr_a.inverse_matrix
    return f / np.linalg.norm(f)


def epipolar_line(f: np.ndarray, point) -> EpipolarLine:
    """
    Epipolar line in view B of a pixel in view A.

    Raises:
        DegenerateGeometryError: if the pixel is the epipole (F x vanishes).
    """
    x = np.array([float(point[0]), float(point[1]), 1.0])
    line = np.asarray(f, dtype=np.float64) @ x
    norm = np.hypot(line[0], line[1])
    if norm < LINE_EPS * max(1.0, np.abs(line).max()):
        raise DegenerateGeometryError(f"Pixel {tuple(point)} is the epipole; line undefined")
    a, b, c = line / norm
    return EpipolarLine(float(a), float(b), float(c))


def epipolar_lines(f: np.ndarray, points: np.ndarray) -> np.ndarray:
    """
    Vectorized epipolar lines for (N, 2) pixels.

    Returns:
        (N, 3) unnormalized line coefficients.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    homog = np.hstack([pts, np.ones((pts.shape[0], 1))])
    return homog @ np.asarray(f, dtype=np.float64).T
