"""
Pipeline configuration.

Every section is a dataclass with the documented defaults. A YAML file can
override any subset of keys:

    initial_iterations: 7000
    stage_iterations: 2000
    schedule: [0.9, 0.7, 0.5, 0.3, 0.1]
    strategy: {kind: stochastic_scaled_forward, yaw_std_deg: 2.0}
    fixer: {name: blur, blur_sigma: 1.5}
    filter: {tau: 0.3, action: downweight}
    optimizer: {lr_position: 1.6e-4}
    render: {tile_size: 16}
    loss: {lambda_dssim: 0.2}
    seed: 0
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from src.errors import PipelineError
from src.losses.objectives import LossConfig
from src.renderer.settings import RenderSettings
from src.trajectories.strategies import DEFAULT_SCHEDULE, StrategyKind, TrajectoryStrategy, altitude_schedule
from .filtering import ViewQualityFilter

FIXER_NAMES = ('identity', 'blur', 'oracle', 'extern')


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Adam hyperparameters with one step size per parameter class.

    The position step size is multiplied by the scene extent.
    """

    lr_position: float = 1.6e-4
    lr_log_scale: float = 5e-3
    lr_rotation: float = 1e-3
    lr_color: float = 2.5e-3
    lr_opacity: float = 5e-2
    lr_features: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-15
    prune_interval: int = 500
    prune_threshold: float = 0.005

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name.startswith('lr_') and getattr(self, f.name) < 0:
                raise PipelineError(f"{f.name} must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise PipelineError("Adam betas must be in [0, 1)")
        if self.prune_interval < 0:
            raise PipelineError("prune_interval must be >= 0")

    def learning_rate(self, name: str) -> float:
        """Step size for a parameter key such as 'gaussians.mu' or 'modulator.sca_w1'."""
        per_field = {
            'gaussians.mu': self.lr_position,
            'gaussians.log_scale': self.lr_log_scale,
            'gaussians.rotation_q': self.lr_rotation,
            'gaussians.color': self.lr_color,
            'gaussians.logit_opacity': self.lr_opacity,
        }
        return per_field.get(name, self.lr_features)


@dataclass(frozen=True)
class FixerConfig:
    name: str = 'identity'
    blur_sigma: float = 1.0
    command: Tuple[str, ...] = ()
    attempts: int = 3
    timeout: Optional[float] = None

    def __post_init__(self):
        if self.name not in FIXER_NAMES:
            raise PipelineError(f"Unknown fixer '{self.name}', expected one of {FIXER_NAMES}")
        object.__setattr__(self, "command", tuple(str(c) for c in self.command))
        if self.name == 'extern' and not self.command:
            raise PipelineError("The extern fixer needs a command")
        if self.attempts < 1:
            raise PipelineError("Fixer attempts must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    """
    Settings of one progressive refinement run.

    Attributes:
        initial_iterations: optimizer steps on the aerial views
        stage_iterations: retraining steps after every stage
        schedule: altitude factor per stage
        strategy: trajectory strategy (its altitude factor is replaced per stage)
        fixer: fixer selection
        filter: view-quality filter
        optimizer: Adam settings
        render: rasterizer settings
        loss: loss weights
        eval_every_stage: evaluate held-out views after every stage
        workers: threads for per-view stage work
        seed: master seed
    """

    initial_iterations: int = 7000
    stage_iterations: int = 2000
    schedule: Tuple[float, ...] = DEFAULT_SCHEDULE
    strategy: TrajectoryStrategy = field(default_factory=lambda: TrajectoryStrategy(
        kind=StrategyKind.STOCHASTIC_SCALED_FORWARD))
    fixer: FixerConfig = field(default_factory=FixerConfig)
    filter: ViewQualityFilter = field(default_factory=ViewQualityFilter)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    render: RenderSettings = field(default_factory=RenderSettings)
    loss: LossConfig = field(default_factory=LossConfig)
    eval_every_stage: bool = True
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.initial_iterations < 0 or self.stage_iterations < 0:
            raise PipelineError("Iteration counts must be >= 0")
        if self.workers < 1:
            raise PipelineError("workers must be >= 1")
        object.__setattr__(self, "schedule", tuple(altitude_schedule(self.schedule)))

    def with_overrides(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


_SECTIONS = {
    'strategy': TrajectoryStrategy,
    'fixer': FixerConfig,
    'filter': ViewQualityFilter,
    'optimizer': OptimizerConfig,
    'render': RenderSettings,
    'loss': LossConfig,
}


def _build_section(cls, values: Any, section: str):
    if not isinstance(values, Mapping):
        raise PipelineError(f"Config section '{section}' must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in known:
            raise PipelineError(f"Unknown config key '{section}.{key}'")
    kwargs = dict(values)
    for key in ('background', 'sobel_scales', 'command'):
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    return cls(**kwargs)


def pipeline_config_from_dict(data: Optional[Mapping[str, Any]]) -> PipelineConfig:
    """
    Build a PipelineConfig from nested plain values.

    Raises:
        PipelineError: unknown keys or invalid values
    """
    data = dict(data or {})
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    kwargs: Dict[str, Any] = {}
    for key, value in data.items():
        if key not in known:
            raise PipelineError(f"Unknown config key '{key}'")
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        elif key == 'schedule':
            kwargs[key] = tuple(float(x) for x in (value or []))
        else:
            kwargs[key] = value
    try:
        return PipelineConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise PipelineError(f"Invalid pipeline config: {e}") from e


def load_pipeline_config(path: str) -> PipelineConfig:
    """Read a YAML config file; a missing or empty file yields the defaults."""
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f)
    if data is not None and not isinstance(data, Mapping):
        raise PipelineError(f"Config file {path} must contain a mapping")
    return pipeline_config_from_dict(data)


def pipeline_config_to_dict(cfg: PipelineConfig) -> Dict[str, Any]:
    """Plain nested values (YAML/JSON friendly)."""
    out = dataclasses.asdict(cfg)
    out['strategy']['kind'] = cfg.strategy.kind.value
    out['schedule'] = list(cfg.schedule)
    return out


def parse_schedule(text: str) -> List[float]:
    """'0.9,0.7,0.5' -> [0.9, 0.7, 0.5]; the empty string is an empty schedule."""
    text = text.strip()
    if not text:
        return []
    try:
        return altitude_schedule([float(x) for x in text.split(',')])
    except ValueError as e:
        raise PipelineError(f"Invalid schedule '{text}': {e}") from e
