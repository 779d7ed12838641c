"""
Persistent storage for refinement stage records.
"""

import json
import logging
import os
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from src.errors import ParseError
from src.trajectories.strategies import StrategyKind, TrajectoryPlan, TrajectoryStrategy
from .plans import format_plan, parse_plan

logger = logging.getLogger(__name__)


class StageRecordStorage:
    """
    Handles persistent storage for refinement stages.

    Each stage of a run is written as `<run_id>/stage_<index>.json` holding
    scalars, verdicts, metrics and the plan text, plus a sibling `.npz` with
    the noisy and fixed images. Floats are written with full precision
    (NaN and Infinity included), so a save/load round trip is lossless.
    """

    def __init__(self, storage_dir: str = None):
        """
        Initialize the storage with a directory path.

        Args:
            storage_dir: Directory path for storing stage records. If None,
                         uses a 'runs' directory in the working directory.
        """
        self.storage_dir = Path(storage_dir) if storage_dir is not None else Path.cwd() / 'runs'
        os.makedirs(self.storage_dir, exist_ok=True)

        # Cache for in-memory access
        self.stages_cache: Dict[str, Dict[int, Any]] = {}

    def _paths(self, run_id: str, index: int):
        stem = self.storage_dir / run_id / f"stage_{index:02d}"
        return stem.with_suffix('.json'), stem.with_suffix('.npz')

    def save_stage(self, run_id: str, stage) -> Path:
        """
        Save a refinement stage.

        Args:
            run_id: Identifier of the refinement run
            stage: RefinementStage to persist

        Returns:
            Path of the JSON record
        """
        json_path, npz_path = self._paths(run_id, stage.index)
        os.makedirs(json_path.parent, exist_ok=True)

        strategy = asdict(stage.plan.strategy)
        strategy['kind'] = stage.plan.strategy.kind.value
        record = {
            'index': stage.index,
            'altitude_factor': stage.altitude_factor,
            'strategy': strategy,
            'plan': format_plan(stage.plan.cameras),
            'plan_errors': [list(e) for e in stage.plan.errors],
            'views': [{'camera_id': v.camera.camera_id, 'reference_id': v.reference_id,
                       'has_fixed': v.fixed is not None, 'verdict': v.verdict.to_dict()}
                      for v in stage.views],
            'losses': [float(x) for x in stage.losses],
            'metrics': {k: float(v) for k, v in stage.metrics.items()},
        }
        arrays = {f'noisy_{i}': v.noisy for i, v in enumerate(stage.views)}
        arrays.update({f'fixed_{i}': v.fixed for i, v in enumerate(stage.views) if v.fixed is not None})

        with open(json_path, 'w') as f:
            json.dump(record, f, indent=2)
        np.savez(npz_path, **arrays)

        self.stages_cache.setdefault(run_id, {})[stage.index] = stage
        logger.debug("Saved stage record", extra={"run": run_id, "stage": stage.index, "path": str(json_path)})
        return json_path

    def get_stage(self, run_id: str, index: int):
        """
        Retrieve a stage record.

        Args:
            run_id: Identifier of the refinement run
            index: Stage index

        Returns:
            The RefinementStage, or None if not found

        Raises:
            ParseError: if the record exists but cannot be decoded
        """
        if run_id in self.stages_cache and index in self.stages_cache[run_id]:
            return self.stages_cache[run_id][index]

        json_path, npz_path = self._paths(run_id, index)
        if not json_path.exists():
            return None
        stage = self._load(json_path, npz_path)
        self.stages_cache.setdefault(run_id, {})[index] = stage
        return stage

    def _load(self, json_path: Path, npz_path: Path):
        from src.pipeline.filtering import FilterVerdict
        from src.pipeline.progressive import RefinementStage, StageView

        try:
            with open(json_path, 'r') as f:
                record = json.load(f)
            strategy = dict(record['strategy'])
            strategy['kind'] = StrategyKind(strategy['kind'])
            plan = TrajectoryPlan(TrajectoryStrategy(**strategy), stage=record['index'],
                                  cameras=parse_plan(record['plan'], str(json_path)),
                                  errors=[tuple(e) for e in record['plan_errors']])
            cameras = {c.camera_id: c for c in plan.cameras}
            with np.load(npz_path) as arrays:
                views = []
                for i, v in enumerate(record['views']):
                    fixed = arrays[f'fixed_{i}'] if v['has_fixed'] else None
                    views.append(StageView(cameras[v['camera_id']], v['reference_id'], arrays[f'noisy_{i}'],
                                           fixed, FilterVerdict(**v['verdict'])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, OSError) as e:
            raise ParseError(f"Cannot decode stage record: {e}", source=str(json_path)) from e
        return RefinementStage(record['index'], record['altitude_factor'], plan, views,
                               record['losses'], record['metrics'])

    def list_stages(self, run_id: str) -> List[Dict[str, Any]]:
        """
        List stage summaries for a run, ordered by stage index.

        Args:
            run_id: Identifier of the refinement run

        Returns:
            List of {'index', 'altitude_factor', 'views', 'accepted'} dicts
        """
        run_dir = self.storage_dir / run_id
        if not run_dir.exists():
            return []

        summaries = []
        for record_file in run_dir.glob("stage_*.json"):
            try:
                with open(record_file, 'r') as f:
                    record = json.load(f)
            except (json.JSONDecodeError, IOError) as e:
                logger.error("Error reading stage record", extra={"path": str(record_file), "error": str(e)})
                continue
            summaries.append({
                'index': record.get('index'),
                'altitude_factor': record.get('altitude_factor'),
                'views': len(record.get('views', [])),
                'accepted': sum(1 for v in record.get('views', []) if v['verdict']['accepted']),
            })

        summaries.sort(key=lambda x: x['index'])
        return summaries

    def delete_stage(self, run_id: str, index: int) -> bool:
        """
        Delete a stage record.

        Returns:
            True if a record was removed, False otherwise
        """
        if run_id in self.stages_cache:
            self.stages_cache[run_id].pop(index, None)

        json_path, npz_path = self._paths(run_id, index)
        if not json_path.exists():
            return False
        try:
            os.remove(json_path)
            if npz_path.exists():
                os.remove(npz_path)
            return True
        except IOError:
            return False

    def clear_cache(self, run_id: Optional[str] = None) -> None:
        if run_id is None:
            self.stages_cache.clear()
        else:
            self.stages_cache.pop(run_id, None)
