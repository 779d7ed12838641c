"""
Camera model, rays and pose algebra.

Conventions:
    - CameraPose stores a camera-to-world rotation and the camera center.
      Camera axes follow the pinhole/OpenCV layout: x right, y down, z forward.
    - Pixel centers sit at integer coordinates with the origin at the top-left,
      so an image of width W spans u in [-0.5, W - 0.5].
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.errors import GeometryError

ORTHONORMAL_TOL = 1e-9
UNIT_TOL = 1e-9


def _frozen_array(values, shape: Tuple[int, ...], name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        raise GeometryError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"Image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError(
                f"Principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.array([[1.0 / self.fx, 0.0, -self.cx / self.fx],
                         [0.0, 1.0 / self.fy, -self.cy / self.fy],
                         [0.0, 0.0, 1.0]])

    def contains(self, pixel) -> bool:
        u, v = float(pixel[0]), float(pixel[1])
        return -0.5 <= u <= self.width - 0.5 and -0.5 <= v <= self.height - 0.5


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world rotation plus camera center in scene units."""

    rotation: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        rot = _frozen_array(self.rotation, (3, 3), "rotation")
        center = _frozen_array(self.center, (3,), "center")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > ORTHONORMAL_TOL:
            raise GeometryError("Pose rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > ORTHONORMAL_TOL:
            raise GeometryError("Pose rotation must have determinant +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "center", center)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def world_to_camera(self) -> np.ndarray:
        """World-to-camera rotation (transpose of the stored rotation)."""
        return self.rotation.T

    @property
    def forward(self) -> np.ndarray:
        """Viewing direction in world coordinates (camera +z axis)."""
        return self.rotation[:, 2].copy()

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """Transform (..., 3) world points into camera coordinates."""
        return (np.asarray(points, dtype=np.float64) - self.center) @ self.rotation

    def matrix_3x4(self) -> np.ndarray:
        """[R | center] as a 3x4 array (camera-to-world)."""
        return np.hstack([self.rotation, self.center[:, None]])


@dataclass(frozen=True)
class Ray:
    """Ray with origin in scene units and a unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", _frozen_array(self.origin, (3,), "origin"))
        object.__setattr__(self, "direction", _frozen_array(self.direction, (3,), "direction"))

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class PluckerRay:
    """Plücker line coordinates (moment o x d, unit direction d)."""

    moment: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "moment", _frozen_array(self.moment, (3,), "moment"))
        object.__setattr__(self, "direction", _frozen_array(self.direction, (3,), "direction"))
        if abs(float(self.moment @ self.direction)) > 1e-9:
            raise GeometryError("Plücker constraint m . d = 0 violated")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.moment, self.direction])


@dataclass(frozen=True)
class RelativePose:
    """Pose of camera B expressed in camera A's frame: X_a = R X_b + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _frozen_array(self.rotation, (3, 3), "rotation")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > ORTHONORMAL_TOL or \
                abs(np.linalg.det(rot) - 1.0) > ORTHONORMAL_TOL:
            raise GeometryError("Relative rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", _frozen_array(self.translation, (3,), "translation"))


@dataclass(frozen=True)
class EpipolarLine:
    """Line a*u + b*v + c = 0 in pixel coordinates with a^2 + b^2 = 1."""

    a: float
    b: float
    c: float

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def distance(self, pixel) -> float:
        """Unsigned pixel distance from a point to the line."""
        return abs(self.a * float(pixel[0]) + self.b * float(pixel[1]) + self.c)


def pixel_to_ray(intr: CameraIntrinsics, pose: CameraPose, pixel) -> Ray:
    """
    Back-project a pixel into a world-space ray.

    Args:
        intr: Camera intrinsics
        pose: Camera pose
        pixel: (u, v) pixel coordinates

    Returns:
        Ray starting at the camera center
    """
    if not intr.contains(pixel):
        raise GeometryError(f"Pixel {tuple(pixel)} outside {intr.width}x{intr.height} image")
    u, v = float(pixel[0]), float(pixel[1])
    local = np.array([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0])
    direction = pose.rotation @ local
    return Ray(pose.center, direction / np.linalg.norm(direction))


def plucker_embedding(ray: Ray) -> PluckerRay:
    """Plücker coordinates (o x d, d) of a ray with unit direction."""
    norm = np.linalg.norm(ray.direction)
    if abs(norm - 1.0) > UNIT_TOL:
        raise GeometryError(f"Ray direction must be unit length, got norm {norm}")
    return PluckerRay(np.cross(ray.origin, ray.direction), ray.direction)


def plucker_ray_map(intr: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """
    Dense per-pixel Plücker embedding.

    Returns:
        (height, width, 6) array of (moment, direction) per pixel center.
    """
    us, vs = np.meshgrid(np.arange(intr.width, dtype=np.float64),
                         np.arange(intr.height, dtype=np.float64))
    local = np.stack([(us - intr.cx) / intr.fx, (vs - intr.cy) / intr.fy, np.ones_like(us)], axis=-1)
    dirs = local @ pose.rotation.T
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    moments = np.cross(np.broadcast_to(pose.center, dirs.shape), dirs)
    return np.concatenate([moments, dirs], axis=-1)


def project_points(intr: CameraIntrinsics, pose: CameraPose, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pinhole projection of world points.

    Returns:
        Tuple of (N, 2) pixel coordinates and (N,) camera-frame depths.
    """
    cam = pose.to_camera(np.atleast_2d(points))
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * cam[:, 0] / z + intr.cx
        v = intr.fy * cam[:, 1] / z + intr.cy
    return np.stack([u, v], axis=-1), z


def relative_pose(a: CameraPose, b: CameraPose) -> RelativePose:
    """Pose of camera b in camera a's frame."""
    rot = a.rotation.T @ b.rotation
    return RelativePose(rot, a.rotation.T @ (b.center - a.center))


def compose_relative(ab: RelativePose, bc: RelativePose) -> RelativePose:
    """Chain relative poses: (a <- b) then (b <- c) gives (a <- c)."""
    return RelativePose(ab.rotation @ bc.rotation, ab.rotation @ bc.translation + ab.translation)


def camera_scene_distance(pose: CameraPose, anchor) -> float:
    """Euclidean distance between the camera center and an anchor point."""
    return float(np.linalg.norm(pose.center - np.asarray(anchor, dtype=np.float64)))


def pose_difference_features(rel: RelativePose) -> np.ndarray:
    """12-vector: row-major relative rotation followed by the translation."""
    return np.concatenate([rel.rotation.reshape(-1), rel.translation])


def reference_pose_features() -> np.ndarray:
    """Reserved all-zeros embedding marking the clean reference view."""
    return np.zeros(12)
