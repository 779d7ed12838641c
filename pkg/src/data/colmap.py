"""
COLMAP sparse-model text format: cameras.txt, images.txt and points3D.txt.

images.txt stores world-to-camera rotations (as quaternions QW QX QY QZ) and
translations; they are converted to camera-to-world rotation plus camera
center on read and back on write.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.errors import AltisplatError, ParseError
from src.geometry.cameras import CameraIntrinsics, CameraPose
from src.geometry.rotations import quaternion_to_rotation, rotation_to_quaternion

logger = logging.getLogger(__name__)

SUPPORTED_MODELS = {'PINHOLE': 4, 'SIMPLE_PINHOLE': 3}
QUATERNION_TOL = 1e-3


@dataclass(frozen=True)
class ColmapImage:
    image_id: int
    name: str
    camera_id: int
    pose: CameraPose


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith('#'):
            continue
        yield lineno, line


def parse_colmap_cameras(text: str, source: str = "") -> Dict[int, CameraIntrinsics]:
    """
    Parse cameras.txt: CAMERA_ID MODEL WIDTH HEIGHT PARAMS...

    Returns:
        Intrinsics keyed by camera id

    Raises:
        ParseError: unsupported model or malformed line
    """
    cameras: Dict[int, CameraIntrinsics] = {}
    for lineno, line in _content_lines(text):
        if not line:
            continue
        toks = line.split()
        if len(toks) < 4:
            raise ParseError(f"Camera line needs at least 4 fields, got {len(toks)}", lineno, source)
        model = toks[1]
        if model not in SUPPORTED_MODELS:
            raise ParseError(f"Unsupported camera model '{model}' (only PINHOLE and SIMPLE_PINHOLE)",
                             lineno, source)
        expected = SUPPORTED_MODELS[model]
        if len(toks) != 4 + expected:
            raise ParseError(f"{model} expects {expected} parameters, got {len(toks) - 4}", lineno, source)
        try:
            camera_id, width, height = int(toks[0]), int(toks[2]), int(toks[3])
            params = [float(x) for x in toks[4:]]
            if model == 'SIMPLE_PINHOLE':
                f, cx, cy = params
                intr = CameraIntrinsics(f, f, cx, cy, width, height)
            else:
                fx, fy, cx, cy = params
                intr = CameraIntrinsics(fx, fy, cx, cy, width, height)
        except (ValueError, AltisplatError) as e:
            raise ParseError(f"Malformed camera line: {e}", lineno, source) from e
        if camera_id in cameras:
            raise ParseError(f"Duplicate camera id {camera_id}", lineno, source)
        cameras[camera_id] = intr
    return cameras


def _is_points_line(line: str) -> bool:
    if not line:
        return True
    toks = line.split()
    if len(toks) % 3:
        return False
    try:
        [float(t) for t in toks]
    except ValueError:
        return False
    return True


def _pose_from_colmap(q: np.ndarray, t: np.ndarray) -> CameraPose:
    w2c = quaternion_to_rotation(q)
    return CameraPose(w2c.T, -w2c.T @ t)


def parse_colmap_images(text: str, cameras: Optional[Dict[int, CameraIntrinsics]] = None,
                        source: str = "") -> Dict[int, ColmapImage]:
    """
    Parse images.txt: IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME, each followed
    by a 2D-points line that is skipped.

    Args:
        text: file contents
        cameras: when given, every image must reference one of these ids
        source: file name used in error messages

    Raises:
        ParseError: malformed line, zero quaternion or unknown camera id
    """
    images: Dict[int, ColmapImage] = {}
    expect_points = False
    for lineno, line in _content_lines(text):
        if expect_points:
            expect_points = False
            if _is_points_line(line):
                continue
        if not line:
            continue
        toks = line.split()
        if len(toks) < 10:
            raise ParseError(f"Image line needs 10 fields, got {len(toks)}", lineno, source)
        try:
            image_id = int(toks[0])
            q = np.array([float(x) for x in toks[1:5]])
            t = np.array([float(x) for x in toks[5:8]])
            camera_id = int(toks[8])
        except ValueError as e:
            raise ParseError(f"Malformed image line: {e}", lineno, source) from e
        name = ' '.join(toks[9:])
        norm = float(np.linalg.norm(q))
        if not np.isfinite(norm) or norm == 0.0 or not np.all(np.isfinite(t)):
            raise ParseError("Zero or non-finite quaternion/translation", lineno, source)
        if abs(norm - 1.0) > QUATERNION_TOL:
            logger.warning("Normalizing non-unit quaternion", extra={"image": name, "norm": norm,
                                                                     "line": lineno})
        if cameras is not None and camera_id not in cameras:
            raise ParseError(f"Image '{name}' references unknown camera id {camera_id}", lineno, source)
        if image_id in images:
            raise ParseError(f"Duplicate image id {image_id}", lineno, source)
        try:
            pose = _pose_from_colmap(q / norm, t)
        except AltisplatError as e:
            raise ParseError(f"Invalid pose: {e}", lineno, source) from e
        images[image_id] = ColmapImage(image_id, name, camera_id, pose)
        expect_points = True
    return images


def parse_colmap_points3d(text: str, source: str = "") -> Tuple[np.ndarray, np.ndarray]:
    """
    Parse points3D.txt: POINT3D_ID X Y Z R G B ERROR TRACK...

    Returns:
        (positions (N, 3), colors (N, 3) in [0, 1])
    """
    positions, colors = [], []
    for lineno, line in _content_lines(text):
        if not line:
            continue
        toks = line.split()
        if len(toks) < 8:
            raise ParseError(f"Point line needs at least 8 fields, got {len(toks)}", lineno, source)
        try:
            positions.append([float(x) for x in toks[1:4]])
            colors.append([int(x) / 255.0 for x in toks[4:7]])
        except ValueError as e:
            raise ParseError(f"Malformed point line: {e}", lineno, source) from e
    return np.array(positions, dtype=np.float64).reshape(-1, 3), np.array(colors, dtype=np.float64).reshape(-1, 3)


def format_colmap_cameras(cameras: Dict[int, CameraIntrinsics]) -> str:
    lines = ["# Camera list with one line of data per camera:",
             "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]"]
    for camera_id, c in cameras.items():
        lines.append(f"{camera_id} PINHOLE {c.width} {c.height} "
                     f"{float(c.fx)!r} {float(c.fy)!r} {float(c.cx)!r} {float(c.cy)!r}")
    return '\n'.join(lines) + '\n'


def format_colmap_images(images: Dict[int, ColmapImage]) -> str:
    lines = ["# Image list with two lines of data per image:",
             "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME",
             "#   POINTS2D[] as (X, Y, POINT3D_ID)"]
    for image_id, img in images.items():
        w2c = img.pose.world_to_camera
        q = rotation_to_quaternion(w2c)
        t = -w2c @ img.pose.center
        values = ' '.join(repr(float(x)) for x in np.concatenate([q, t]))
        lines.append(f"{image_id} {values} {img.camera_id} {img.name}")
        lines.append("")
    return '\n'.join(lines) + '\n'


def format_colmap_points3d(positions: np.ndarray, colors: Optional[np.ndarray] = None) -> str:
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    colors = np.full_like(positions, 0.5) if colors is None else np.asarray(colors).reshape(-1, 3)
    rgb = np.clip(np.rint(colors * 255), 0, 255).astype(int)
    lines = ["# 3D point list with one line of data per point:",
             "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)"]
    for i, (p, c) in enumerate(zip(positions, rgb), start=1):
        lines.append(f"{i} {p[0]!r} {p[1]!r} {p[2]!r} {c[0]} {c[1]} {c[2]} 0.0")
    return '\n'.join(lines) + '\n'


def read_colmap_model(directory: Union[str, Path]):
    """
    Read cameras.txt, images.txt and (if present) points3D.txt from a directory.

    Returns:
        (cameras, images, (positions, colors) or None)
    """
    directory = Path(directory)
    cam_path = directory / 'cameras.txt'
    img_path = directory / 'images.txt'
    cameras = parse_colmap_cameras(cam_path.read_text(encoding='utf-8'), str(cam_path))
    images = parse_colmap_images(img_path.read_text(encoding='utf-8'), cameras, str(img_path))
    pts_path = directory / 'points3D.txt'
    points = parse_colmap_points3d(pts_path.read_text(encoding='utf-8'), str(pts_path)) \
        if pts_path.exists() else None
    return cameras, images, points


def write_colmap_model(directory: Union[str, Path], cameras: Dict[int, CameraIntrinsics],
                       images: Dict[int, ColmapImage], positions: Optional[np.ndarray] = None,
                       colors: Optional[np.ndarray] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / 'cameras.txt').write_text(format_colmap_cameras(cameras), encoding='utf-8')
    (directory / 'images.txt').write_text(format_colmap_images(images), encoding='utf-8')
    if positions is not None:
        (directory / 'points3D.txt').write_text(format_colmap_points3d(positions, colors), encoding='utf-8')
    return directory
