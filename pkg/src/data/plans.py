"""
Line-oriented text format for trajectory plans.

One camera per line, whitespace separated:

    CAMERA_ID STAGE SOURCE_ID R00 R01 R02 C0 R10 R11 R12 C1 R20 R21 R22 C2 FX FY CX CY WIDTH HEIGHT

The 3x4 block is the camera-to-world rotation with the camera center as last
column. SOURCE_ID is '-' for cameras with no source. Lines starting with '#'
are comments.
"""

from pathlib import Path
from typing import Iterable, List, Union

import numpy as np

from src.errors import AltisplatError, ParseError
from src.geometry.cameras import CameraIntrinsics, CameraPose
from src.trajectories.strategies import PlannedCamera, TrajectoryPlan

HEADER = "# CAMERA_ID STAGE SOURCE_ID POSE_3x4(row-major, camera-to-world) FX FY CX CY WIDTH HEIGHT"
FIELD_COUNT = 21


def format_camera_line(cam: PlannedCamera) -> str:
    pose = cam.pose.matrix_3x4().reshape(-1)
    intr = cam.intrinsics
    values = ' '.join(repr(float(x)) for x in pose)
    return (f"{cam.camera_id} {cam.stage} {cam.source_id or '-'} {values} "
            f"{float(intr.fx)!r} {float(intr.fy)!r} {float(intr.cx)!r} {float(intr.cy)!r} "
            f"{intr.width} {intr.height}")


def format_plan(cameras: Iterable[PlannedCamera]) -> str:
    lines = [HEADER] + [format_camera_line(c) for c in cameras]
    return '\n'.join(lines) + '\n'


def parse_plan(text: str, source: str = "") -> List[PlannedCamera]:
    """
    Raises:
        ParseError: malformed line (with line number)
    """
    cameras = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        if len(parts) != FIELD_COUNT:
            raise ParseError(f"Expected {FIELD_COUNT} fields, got {len(parts)}", lineno, source)
        try:
            stage = int(parts[1])
            numbers = [float(x) for x in parts[3:19]]
            width, height = int(parts[19]), int(parts[20])
            m = np.array(numbers[:12]).reshape(3, 4)
            pose = CameraPose(m[:, :3], m[:, 3])
            intr = CameraIntrinsics(numbers[12], numbers[13], numbers[14], numbers[15], width, height)
        except (ValueError, AltisplatError) as e:
            raise ParseError(str(e), lineno, source) from e
        source_id = None if parts[2] == '-' else parts[2]
        cameras.append(PlannedCamera(parts[0], intr, pose, stage, source_id))
    return cameras


def write_plan(path: Union[str, Path], plan: Union[TrajectoryPlan, Iterable[PlannedCamera]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cameras = plan.cameras if isinstance(plan, TrajectoryPlan) else plan
    path.write_text(format_plan(cameras), encoding='utf-8')
    return path


def read_plan(path: Union[str, Path]) -> List[PlannedCamera]:
    path = Path(path)
    return parse_plan(path.read_text(encoding='utf-8'), source=str(path))
