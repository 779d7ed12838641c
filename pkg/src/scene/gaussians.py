"""
Gaussian primitives and the scene container.

The scene stores its primitives as a structure of arrays so the renderer and
optimizer can work on all Gaussians at once; GaussianPrimitive is a read-only
view of one row.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np
from scipy.spatial import cKDTree

from src.errors import SceneError
from src.geometry.rotations import quaternion_to_rotation
from .appearance import AppearanceTable
from .modulator import AdaptiveModulator, sigmoid

logger = logging.getLogger(__name__)

INITIAL_OPACITY = 0.1
PRUNE_OPACITY = 0.005

GAUSSIAN_FIELDS = ('mu', 'log_scale', 'rotation_q', 'color', 'logit_opacity', 'f_sca', 'f_opa')


def logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


def covariance_from_params(log_scale: np.ndarray, rotation_q: np.ndarray) -> np.ndarray:
    """
    Sigma = R diag(exp(log_scale))^2 R^T.

    Works on single parameters ((3,), (4,)) or batches ((N, 3), (N, 4)).
    """
    rot = quaternion_to_rotation(rotation_q)
    scales = np.exp(np.asarray(log_scale, dtype=np.float64))
    m = rot * scales[..., None, :]
    return m @ np.swapaxes(m, -1, -2)


@dataclass(frozen=True)
class GaussianPrimitive:
    """One Gaussian: mean, log-scales, quaternion, RGB, opacity logit, features."""

    mu: np.ndarray
    log_scale: np.ndarray
    rotation_q: np.ndarray
    color: np.ndarray
    logit_opacity: float
    f_sca: np.ndarray
    f_opa: np.ndarray

    @property
    def opacity(self) -> float:
        return float(sigmoid(self.logit_opacity))

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    @property
    def covariance(self) -> np.ndarray:
        return covariance_from_params(self.log_scale, self.rotation_q)


def evaluate_gaussian(g: GaussianPrimitive, x) -> float:
    """Density alpha * exp(-1/2 (x - mu)^T Sigma^-1 (x - mu)) with alpha the base opacity."""
    delta = np.asarray(x, dtype=np.float64) - g.mu
    quad = float(delta @ np.linalg.solve(g.covariance, delta))
    return g.opacity * float(np.exp(-0.5 * quad))


class GaussianScene:
    """
    Gaussian primitives plus the distance-adaptive modulator and appearance table.
    """

    def __init__(self, mu: np.ndarray, log_scale: np.ndarray, rotation_q: np.ndarray,
                 color: np.ndarray, logit_opacity: np.ndarray, f_sca: np.ndarray, f_opa: np.ndarray,
                 modulator: AdaptiveModulator, appearance: Optional[AppearanceTable] = None):
        n = np.asarray(mu).shape[0]
        f_dim = modulator.feature_dim
        self.mu = np.asarray(mu, dtype=np.float64).reshape(n, 3)
        self.log_scale = np.asarray(log_scale, dtype=np.float64).reshape(n, 3)
        self.rotation_q = np.asarray(rotation_q, dtype=np.float64).reshape(n, 4)
        self.color = np.asarray(color, dtype=np.float64).reshape(n, 3)
        self.logit_opacity = np.asarray(logit_opacity, dtype=np.float64).reshape(n)
        self.f_sca = np.asarray(f_sca, dtype=np.float64).reshape(n, f_dim)
        self.f_opa = np.asarray(f_opa, dtype=np.float64).reshape(n, f_dim)
        self.modulator = modulator
        self.appearance = appearance if appearance is not None else AppearanceTable.create(dim=16)
        if n and np.any(np.linalg.norm(self.rotation_q, axis=1) == 0):
            raise SceneError("Zero quaternion in scene")

    def __len__(self) -> int:
        return self.mu.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.modulator.feature_dim

    @property
    def opacity(self) -> np.ndarray:
        return sigmoid(self.logit_opacity)

    @property
    def centroid(self) -> np.ndarray:
        if len(self) == 0:
            raise SceneError("Empty scene has no centroid")
        return self.mu.mean(axis=0)

    def primitive(self, index: int) -> GaussianPrimitive:
        return GaussianPrimitive(self.mu[index].copy(), self.log_scale[index].copy(),
                                 self.rotation_q[index].copy(), self.color[index].copy(),
                                 float(self.logit_opacity[index]), self.f_sca[index].copy(),
                                 self.f_opa[index].copy())

    def gaussian_parameters(self) -> Dict[str, np.ndarray]:
        return {f'gaussians.{name}': getattr(self, name) for name in GAUSSIAN_FIELDS}

    def parameters(self) -> Dict[str, np.ndarray]:
        """Every optimizable array, keyed by name (live references)."""
        params = self.gaussian_parameters()
        params.update(self.modulator.parameters())
        params.update(self.appearance.parameters())
        return params

    def normalize_quaternions(self) -> None:
        self.rotation_q /= np.linalg.norm(self.rotation_q, axis=1, keepdims=True)

    def clamp_colors(self) -> None:
        np.clip(self.color, 0.0, 1.0, out=self.color)

    def prune(self, threshold: float = PRUNE_OPACITY) -> np.ndarray:
        """
        Remove Gaussians whose base opacity is below threshold.

        The most opaque Gaussian always survives so the scene never empties.

        Returns:
            Boolean keep-mask over the Gaussians before pruning.
        """
        keep = self.opacity >= threshold
        if len(self) and not keep.any():
            keep[int(np.argmax(self.logit_opacity))] = True
        if not keep.all():
            for name in GAUSSIAN_FIELDS:
                setattr(self, name, getattr(self, name)[keep].copy())
            logger.info("Pruned low-opacity Gaussians",
                        extra={"removed": int((~keep).sum()), "remaining": len(self)})
        return keep

    def copy(self) -> "GaussianScene":
        return GaussianScene(*(getattr(self, name).copy() for name in GAUSSIAN_FIELDS),
                             modulator=self.modulator.copy(), appearance=self.appearance.copy())


def nearest_neighbor_scale(positions: np.ndarray, k: int = 3, default: float = 0.1) -> np.ndarray:
    """Mean distance from each point to its k nearest neighbours."""
    n = positions.shape[0]
    if n < 2:
        return np.full(n, default)
    k = min(k, n - 1)
    dists, _ = cKDTree(positions).query(positions, k=k + 1)
    return np.maximum(dists[:, 1:].mean(axis=1), 1e-7)


def init_from_points(positions: np.ndarray, colors: Optional[np.ndarray] = None,
                     feature_dim: int = 8, hidden: int = 32,
                     appearance_ids: Iterable[str] = (), appearance_dim: int = 16,
                     rng: Optional[np.random.Generator] = None,
                     feature_std: float = 0.01) -> GaussianScene:
    """
    Expand a point cloud into one isotropic Gaussian per point.

    Args:
        positions: (N, 3) point positions
        colors: (N, 3) colors in [0, 1]; mid-gray when None
        feature_dim: size of f_sca / f_opa
        hidden: modulator hidden width
        appearance_ids: training image ids that get appearance embeddings
        appearance_dim: embedding size
        rng: random generator for features and network weights

    Returns:
        GaussianScene with opacity 0.1 and nearest-neighbour scales
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = positions.shape[0]
    if n == 0:
        raise SceneError("Cannot initialize a scene from an empty point cloud")
    rng = rng if rng is not None else np.random.default_rng(0)
    colors = np.full((n, 3), 0.5) if colors is None else np.clip(np.asarray(colors, dtype=np.float64), 0, 1)

    scale = nearest_neighbor_scale(positions)
    rotation_q = np.zeros((n, 4))
    rotation_q[:, 0] = 1.0
    return GaussianScene(
        mu=positions.copy(),
        log_scale=np.repeat(np.log(scale)[:, None], 3, axis=1),
        rotation_q=rotation_q,
        color=colors.reshape(n, 3).copy(),
        logit_opacity=np.full(n, logit(INITIAL_OPACITY)),
        f_sca=rng.normal(0.0, feature_std, size=(n, feature_dim)),
        f_opa=rng.normal(0.0, feature_std, size=(n, feature_dim)),
        modulator=AdaptiveModulator.create(feature_dim, hidden, rng=rng),
        appearance=AppearanceTable.create(appearance_ids, appearance_dim, rng=rng),
    )
