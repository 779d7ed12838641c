"""
View fixers.

A fixer turns a noisy render at a novel pose into a cleaner image, given the
nearest training view as reference. The restoration model is pluggable:

    identity   returns the render unchanged
    blur       Gaussian smoothing
    oracle     renders a hidden ground-truth scene (synthetic harness only)
    extern     runs an external command per view
"""

import logging
import subprocess
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_fixed

from src.errors import FixerError
from src.geometry.cameras import CameraIntrinsics, CameraPose
from src.renderer.rasterizer import render
from src.renderer.settings import RenderSettings
from src.scene.gaussians import GaussianScene
from src.trajectories.strategies import PlannedCamera
from src.data.images import read_image, write_image
from src.data.plans import format_plan

logger = logging.getLogger(__name__)


class Fixer(ABC):
    """
    Fixer interface.

    Attributes:
        name: registry name
        thread_safe: fix() may run concurrently
        deterministic: same inputs give the same output
    """

    name = 'fixer'
    thread_safe = True
    deterministic = True

    @abstractmethod
    def fix(self, noisy: np.ndarray, reference: np.ndarray, novel_intrinsics: CameraIntrinsics,
            novel_pose: CameraPose, reference_pose: CameraPose) -> np.ndarray:
        """Return the fixed image with the noisy render's shape."""

    def __call__(self, noisy: np.ndarray, reference: np.ndarray, novel_intrinsics: CameraIntrinsics,
                 novel_pose: CameraPose, reference_pose: CameraPose) -> np.ndarray:
        """
        Run fix() and check the output contract.

        Raises:
            FixerError: wrong resolution or non-finite output
        """
        out = np.asarray(self.fix(noisy, reference, novel_intrinsics, novel_pose, reference_pose),
                         dtype=np.float64)
        if out.shape != noisy.shape:
            raise FixerError(f"{self.name} fixer returned {out.shape}, expected {noisy.shape}")
        if not np.all(np.isfinite(out)):
            raise FixerError(f"{self.name} fixer returned non-finite pixels")
        return np.clip(out, 0.0, 1.0)


class IdentityFixer(Fixer):
    name = 'identity'

    def fix(self, noisy, reference, novel_intrinsics, novel_pose, reference_pose):
        return noisy.copy()


class BlurFixer(Fixer):
    """Per-channel Gaussian smoothing with standard deviation sigma pixels."""

    name = 'blur'

    def __init__(self, sigma: float = 1.0):
        if sigma < 0:
            raise FixerError(f"Blur sigma must be >= 0, got {sigma}")
        self.sigma = sigma

    def fix(self, noisy, reference, novel_intrinsics, novel_pose, reference_pose):
        return ndimage.gaussian_filter(noisy, sigma=(self.sigma, self.sigma, 0.0), mode='nearest')


class OracleFixer(Fixer):
    """Renders the hidden ground-truth scene at the novel pose."""

    name = 'oracle'

    def __init__(self, gt_scene: GaussianScene, settings: Optional[RenderSettings] = None):
        self.gt_scene = gt_scene
        self.settings = settings or RenderSettings()

    def fix(self, noisy, reference, novel_intrinsics, novel_pose, reference_pose):
        return render(self.gt_scene, novel_intrinsics, novel_pose, self.settings).image


class ExternalFixer(Fixer):
    """
    Runs `command NOISY REFERENCE POSES OUTPUT` per view.

    The poses file holds two plan lines, 'novel' then 'reference' (both with
    the novel camera's intrinsics). Exit code 0
    and a readable OUTPUT image mean success; failures are retried.
    """

    name = 'extern'
    deterministic = False

    def __init__(self, command: Sequence[str], attempts: int = 3, timeout: Optional[float] = None,
                 retry_wait: float = 0.5):
        if not command:
            raise FixerError("External fixer needs a command")
        self.command = [str(c) for c in command]
        self.attempts = attempts
        self.timeout = timeout
        self.retry_wait = retry_wait

    def _run_once(self, workdir: Path) -> np.ndarray:
        args = self.command + [str(workdir / 'noisy.png'), str(workdir / 'reference.png'),
                               str(workdir / 'poses.txt'), str(workdir / 'fixed.png')]
        try:
            proc = subprocess.run(args, capture_output=True, text=True, timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise FixerError(f"External fixer failed to run: {e}") from e
        if proc.returncode != 0:
            raise FixerError(f"External fixer exited with {proc.returncode}: {proc.stderr.strip()[:200]}")
        try:
            return read_image(workdir / 'fixed.png')
        except Exception as e:
            raise FixerError(f"External fixer produced no readable output: {e}") from e

    def fix(self, noisy, reference, novel_intrinsics, novel_pose, reference_pose):
        with tempfile.TemporaryDirectory(prefix='altisplat-fix-') as tmp:
            workdir = Path(tmp)
            write_image(workdir / 'noisy.png', noisy)
            write_image(workdir / 'reference.png', reference)
            poses = [PlannedCamera('novel', novel_intrinsics, novel_pose),
                     PlannedCamera('reference', novel_intrinsics, reference_pose)]
            (workdir / 'poses.txt').write_text(format_plan(poses), encoding='utf-8')

            retrying = Retrying(stop=stop_after_attempt(self.attempts), wait=wait_fixed(self.retry_wait),
                                retry=retry_if_exception_type(FixerError), reraise=True)
            for attempt in retrying:
                with attempt:
                    if attempt.retry_state.attempt_number > 1:
                        logger.warning("Retrying external fixer",
                                       extra={"attempt": attempt.retry_state.attempt_number})
                    return self._run_once(workdir)
        raise FixerError("External fixer did not run")


def make_fixer(name: str, blur_sigma: float = 1.0, gt_scene: Optional[GaussianScene] = None,
               command: Sequence[str] = (), attempts: int = 3, timeout: Optional[float] = None,
               settings: Optional[RenderSettings] = None) -> Fixer:
    """
    Build a fixer by name.

    Raises:
        FixerError: unknown name, or the oracle without a ground-truth scene
    """
    if name == 'identity':
        return IdentityFixer()
    if name == 'blur':
        return BlurFixer(blur_sigma)
    if name == 'oracle':
        if gt_scene is None:
            raise FixerError("The oracle fixer needs the hidden ground-truth scene")
        return OracleFixer(gt_scene, settings)
    if name == 'extern':
        return ExternalFixer(command, attempts, timeout)
    raise FixerError(f"Unknown fixer '{name}'")
