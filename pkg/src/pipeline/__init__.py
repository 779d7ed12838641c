"""
Pipeline module initialization
"""

from .config import (
    FixerConfig,
    OptimizerConfig,
    PipelineConfig,
    load_pipeline_config,
    parse_schedule,
    pipeline_config_from_dict,
    pipeline_config_to_dict,
)
from .filtering import FilterVerdict, ViewQualityFilter
from .optimizer import Adam
from .training import TrainingResult, TrainingView, reference_for, reference_scores, scene_extent, train_splats
from .fixers import BlurFixer, ExternalFixer, Fixer, IdentityFixer, OracleFixer, make_fixer
from .progressive import ProgressiveResult, RefinementStage, StageView, evaluate_views, run_progressive, run_stage
from .synthetic import (
    SyntheticExperiment,
    SyntheticScene,
    run_synthetic_experiment,
    synthetic_intrinsics,
    synthetic_scene_generator,
)

__all__ = [
    'FixerConfig',
    'OptimizerConfig',
    'PipelineConfig',
    'load_pipeline_config',
    'parse_schedule',
    'pipeline_config_from_dict',
    'pipeline_config_to_dict',
    'FilterVerdict',
    'ViewQualityFilter',
    'Adam',
    'TrainingResult',
    'TrainingView',
    'reference_for',
    'reference_scores',
    'scene_extent',
    'train_splats',
    'BlurFixer',
    'ExternalFixer',
    'Fixer',
    'IdentityFixer',
    'OracleFixer',
    'make_fixer',
    'ProgressiveResult',
    'RefinementStage',
    'StageView',
    'evaluate_views',
    'run_progressive',
    'run_stage',
    'SyntheticExperiment',
    'SyntheticScene',
    'run_synthetic_experiment',
    'synthetic_intrinsics',
    'synthetic_scene_generator',
]
