"""
Trajectories module initialization
"""

from .strategies import (
    DEFAULT_SCHEDULE,
    CameraEntry,
    PlannedCamera,
    StrategyKind,
    TrajectoryPlan,
    TrajectoryStrategy,
    altitude_schedule,
    estimate_ground_height,
    generate,
    look_at,
)

__all__ = [
    'DEFAULT_SCHEDULE',
    'CameraEntry',
    'PlannedCamera',
    'StrategyKind',
    'TrajectoryPlan',
    'TrajectoryStrategy',
    'altitude_schedule',
    'estimate_ground_height',
    'generate',
    'look_at',
]
