"""
View-quality filter for fixed novel views.

A fixed view is compared with its reference view by DSSIM. Views that deviate
too much are discarded, or kept with a reduced sampling weight.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.errors import PipelineError
from src.losses.metrics import dssim

FILTER_ACTIONS = ('discard', 'downweight')
MAX_TAU = 0.5


@dataclass(frozen=True)
class ViewQualityFilter:
    """
    Attributes:
        tau: DSSIM threshold in [0, 0.5]; 0 rejects every view
        action: 'discard' or 'downweight'
        weight_floor: smallest weight a downweighted view keeps
    """

    tau: float = 0.3
    action: str = 'discard'
    weight_floor: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.tau <= MAX_TAU:
            raise PipelineError(f"Filter threshold must be in [0, {MAX_TAU}], got {self.tau}")
        if self.action not in FILTER_ACTIONS:
            raise PipelineError(f"Filter action must be one of {FILTER_ACTIONS}, got '{self.action}'")
        if not 0.0 < self.weight_floor <= 1.0:
            raise PipelineError(f"Weight floor must be in (0, 1], got {self.weight_floor}")

    def judge(self, score: float) -> "FilterVerdict":
        """Verdict for a DSSIM score."""
        if self.tau == 0.0:
            return FilterVerdict(False, 0.0, score)
        if self.action == 'discard':
            accepted = score <= self.tau
            return FilterVerdict(accepted, 1.0 if accepted else 0.0, score)
        return FilterVerdict(True, max(self.weight_floor, 1.0 - score / self.tau), score)

    def evaluate(self, fixed: np.ndarray, reference: np.ndarray) -> "FilterVerdict":
        return self.judge(dssim(fixed, reference))


@dataclass(frozen=True)
class FilterVerdict:
    accepted: bool
    weight: float
    dssim: float
    reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {'accepted': self.accepted, 'weight': self.weight, 'dssim': self.dssim, 'reason': self.reason}
