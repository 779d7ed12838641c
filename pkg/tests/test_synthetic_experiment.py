import numpy as np
import pytest

from src.pipeline import PipelineConfig
from src.pipeline.synthetic import run_synthetic_experiment

# desktop-sized run; the defaults are for real captures
EXPERIMENT = PipelineConfig(initial_iterations=1500, stage_iterations=400, workers=4)


@pytest.mark.slow
def test_oracle_refinement_beats_aerial_only_baseline():
    experiment = run_synthetic_experiment(seed=0, config=EXPERIMENT, fixer_name='oracle')
    assert experiment.improvement >= 3.0

    stage_psnr = experiment.progressive.metrics['ground_psnr'].to_numpy()
    assert len(stage_psnr) == len(EXPERIMENT.schedule) + 1
    assert np.all(np.diff(stage_psnr) >= -0.2)

    train_views = experiment.progressive.metrics['train_views'].to_numpy()
    assert np.all(np.diff(train_views) >= 0)
    assert train_views[0] == 30


@pytest.mark.slow
def test_identity_fixer_does_not_hurt_ground_views():
    experiment = run_synthetic_experiment(seed=0, config=EXPERIMENT, fixer_name='identity')
    assert experiment.improvement >= -1.0
