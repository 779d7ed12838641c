"""
Novel camera generation for altitude-progressive refinement.

Five strategies lower the aerial cameras toward the ground:

    elliptical                  look-at ring over the camera footprint
    scaled                      height above ground scaled by s, orientation kept
    forward                     slide along the viewing axis down to the target height
    stochastic_forward          forward, then small yaw/pitch noise
    stochastic_scaled_forward   scaled with a partial forward slide, then noise

Altitude is height above the ground plane z = ground_height.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import GeometryError, TrajectoryError
from src.geometry.cameras import CameraIntrinsics, CameraPose
from src.geometry.rotations import axis_angle_rotation

logger = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (0.9, 0.7, 0.5, 0.3, 0.1)
WORLD_UP = np.array([0.0, 0.0, 1.0])
DOWNWARD_EPS = 1e-9

CameraEntry = Tuple[str, CameraIntrinsics, CameraPose]


class StrategyKind(str, Enum):
    ELLIPTICAL = 'elliptical'
    SCALED = 'scaled'
    FORWARD = 'forward'
    STOCHASTIC_FORWARD = 'stochastic_forward'
    STOCHASTIC_SCALED_FORWARD = 'stochastic_scaled_forward'


@dataclass(frozen=True)
class TrajectoryStrategy:
    """
    Strategy and its parameters.

    Attributes:
        kind: which strategy
        altitude_factor: s in (0, 1]
        forward_fraction: share of the altitude drop taken along the viewing axis
            (stochastic_scaled_forward only)
        yaw_std_deg, pitch_std_deg: noise standard deviations in degrees
        sample_count: elliptical samples; defaults to the number of base cameras
        ellipse_margin: growth factor of the bounding ellipse
        seed: noise seed
    """

    kind: StrategyKind = StrategyKind.SCALED
    altitude_factor: float = 0.9
    forward_fraction: float = 0.1
    yaw_std_deg: float = 2.0
    pitch_std_deg: float = 2.0
    sample_count: Optional[int] = None
    ellipse_margin: float = 1.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if not 0.0 < self.altitude_factor <= 1.0:
            raise TrajectoryError(f"Altitude factor must be in (0, 1], got {self.altitude_factor}")
        if self.yaw_std_deg < 0 or self.pitch_std_deg < 0:
            raise TrajectoryError("Noise standard deviations must be >= 0")
        if not 0.0 <= self.forward_fraction <= 1.0:
            raise TrajectoryError(f"Forward fraction must be in [0, 1], got {self.forward_fraction}")
        if self.sample_count is not None and self.sample_count < 1:
            raise TrajectoryError("Sample count must be >= 1")
        if self.ellipse_margin < 1.0:
            raise TrajectoryError("Ellipse margin must be >= 1")

    def at_altitude(self, factor: float) -> "TrajectoryStrategy":
        return replace(self, altitude_factor=factor)


@dataclass(frozen=True)
class PlannedCamera:
    camera_id: str
    intrinsics: CameraIntrinsics
    pose: CameraPose
    stage: int = 0
    source_id: Optional[str] = None


@dataclass
class TrajectoryPlan:
    """Ordered novel cameras plus per-camera errors for skipped sources."""

    strategy: TrajectoryStrategy
    stage: int = 0
    cameras: List[PlannedCamera] = field(default_factory=list)
    errors: List[Tuple[str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cameras)


def look_at(position, target, up=WORLD_UP) -> CameraPose:
    """
    Camera at position whose forward axis points at target.

    Raises:
        TrajectoryError: position equals target or up is parallel to the view direction
    """
    position = np.asarray(position, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - position
    dist = np.linalg.norm(fwd)
    if dist < 1e-12:
        raise TrajectoryError("look_at position and target coincide")
    fwd /= dist
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    norm = np.linalg.norm(right)
    if norm < 1e-9:
        raise TrajectoryError("Up vector is parallel to the viewing direction")
    right /= norm
    down = np.cross(fwd, right)
    return CameraPose(np.stack([right, down, fwd], axis=1), position)


def altitude_schedule(levels: Optional[Sequence[float]] = None) -> List[float]:
    """
    Stage altitude factors, strictly decreasing in (0, 1].

    Raises:
        TrajectoryError: out-of-range or non-decreasing factors
    """
    factors = list(DEFAULT_SCHEDULE if levels is None else (float(x) for x in levels))
    for f in factors:
        if not 0.0 < f <= 1.0:
            raise TrajectoryError(f"Altitude factor {f} outside (0, 1]")
    for prev, cur in zip(factors, factors[1:]):
        if cur >= prev:
            raise TrajectoryError(f"Altitude schedule must be strictly decreasing, got {factors}")
    return factors


def estimate_ground_height(points: np.ndarray, percentile: float = 5.0) -> float:
    """Ground plane height as a low percentile of point z."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] == 0:
        raise TrajectoryError("Cannot estimate ground height without points")
    return float(np.percentile(points[:, 2], percentile))


def _perturb(rotation: np.ndarray, rng: np.random.Generator, strategy: TrajectoryStrategy) -> np.ndarray:
    if strategy.yaw_std_deg > 0:
        yaw = np.deg2rad(rng.normal(0.0, strategy.yaw_std_deg))
        rotation = axis_angle_rotation(WORLD_UP, yaw) @ rotation
    if strategy.pitch_std_deg > 0:
        pitch = np.deg2rad(rng.normal(0.0, strategy.pitch_std_deg))
        rotation = rotation @ axis_angle_rotation(np.array([1.0, 0.0, 0.0]), pitch)
    return rotation


def _scaled_center(center: np.ndarray, s: float, ground: float) -> np.ndarray:
    out = center.copy()
    out[2] = ground + s * (center[2] - ground)
    return out


def _forward_center(pose: CameraPose, s: float, ground: float) -> np.ndarray:
    d = pose.forward
    if d[2] >= -DOWNWARD_EPS:
        raise TrajectoryError("Camera has no downward viewing component")
    target = ground + s * (pose.center[2] - ground)
    step = (pose.center[2] - target) / (-d[2])
    out = pose.center + step * d
    out[2] = target
    return out


def _scaled_forward_center(pose: CameraPose, s: float, ground: float, fraction: float) -> np.ndarray:
    target = ground + s * (pose.center[2] - ground)
    drop = pose.center[2] - target
    d = pose.forward
    out = pose.center.copy()
    if fraction > 0 and d[2] < -DOWNWARD_EPS:
        out = out + (fraction * drop / (-d[2])) * d
    out[2] = target
    return out


def _elliptical(strategy: TrajectoryStrategy, base: Sequence[CameraEntry], centroid: np.ndarray,
                ground: float, stage: int) -> TrajectoryPlan:
    plan = TrajectoryPlan(strategy, stage)
    xy = np.array([pose.center[:2] for _, _, pose in base])
    heights = np.array([pose.center[2] - ground for _, _, pose in base])
    center = xy.mean(axis=0)
    offsets = xy - center
    semi = np.abs(offsets).max(axis=0)
    fallback = max(semi.max(), 1.0)
    semi = np.where(semi > 1e-9, semi, fallback)
    bound = float(np.sqrt(((offsets / semi) ** 2).sum(axis=1)).max())
    semi = semi * max(bound, 1.0) * strategy.ellipse_margin
    altitude = ground + strategy.altitude_factor * float(heights.mean())

    count = strategy.sample_count or len(base)
    intr = base[0][1]
    for k in range(count):
        theta = 2.0 * np.pi * k / count
        position = np.array([center[0] + semi[0] * np.cos(theta),
                             center[1] + semi[1] * np.sin(theta), altitude])
        cam_id = f"s{stage}_{strategy.kind.value}_{k:04d}"
        try:
            pose = look_at(position, centroid)
        except TrajectoryError as e:
            plan.errors.append((cam_id, str(e)))
            continue
        plan.cameras.append(PlannedCamera(cam_id, intr, pose, stage, None))
    return plan


def generate(strategy: TrajectoryStrategy, base_cameras: Sequence[CameraEntry], centroid,
             ground_height: float = 0.0, stage: int = 0) -> TrajectoryPlan:
    """
    Novel cameras for one stage.

    Args:
        strategy: strategy and parameters
        base_cameras: (camera_id, intrinsics, pose) of the aerial cameras
        centroid: scene centroid (look-at target of the elliptical path)
        ground_height: ground plane height
        stage: stage index stamped on the plan

    Returns:
        TrajectoryPlan; cameras that cannot be moved are listed in plan.errors

    Raises:
        TrajectoryError: no base cameras
    """
    if not base_cameras:
        raise TrajectoryError("Trajectory generation needs at least one base camera")
    centroid = np.asarray(centroid, dtype=np.float64)
    kind = strategy.kind
    if kind is StrategyKind.ELLIPTICAL:
        plan = _elliptical(strategy, base_cameras, centroid, ground_height, stage)
    else:
        plan = TrajectoryPlan(strategy, stage)
        rng = np.random.default_rng(strategy.seed)
        s = strategy.altitude_factor
        noisy = kind in (StrategyKind.STOCHASTIC_FORWARD, StrategyKind.STOCHASTIC_SCALED_FORWARD)
        for cam_id, intr, pose in base_cameras:
            new_id = f"s{stage}_{kind.value}_{cam_id}"
            try:
                if kind is StrategyKind.SCALED:
                    center = _scaled_center(pose.center, s, ground_height)
                elif kind is StrategyKind.STOCHASTIC_SCALED_FORWARD:
                    center = _scaled_forward_center(pose, s, ground_height, strategy.forward_fraction)
                else:
                    center = _forward_center(pose, s, ground_height)
                rotation = _perturb(pose.rotation, rng, strategy) if noisy else pose.rotation
                new_pose = CameraPose(rotation, center)
            except (TrajectoryError, GeometryError) as e:
                logger.warning("Skipping camera", extra={"camera": cam_id, "strategy": kind.value,
                                                         "reason": str(e)})
                plan.errors.append((cam_id, str(e)))
                continue
            plan.cameras.append(PlannedCamera(new_id, intr, new_pose, stage, cam_id))
    logger.info("Generated trajectory", extra={"strategy": kind.value, "stage": stage,
                                               "cameras": len(plan.cameras), "errors": len(plan.errors)})
    return plan
