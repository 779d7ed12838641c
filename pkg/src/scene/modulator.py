"""
Distance-adaptive Gaussian module.

Two small feed-forward networks map (per-Gaussian feature, camera distance) to
pre-activations alpha_sca / alpha_opa. Their sigmoids gate the Gaussian's
scale and opacity for the active camera.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.errors import SceneError


def sigmoid(x):
    # clipped so gates stay strictly inside (0, 1) in float64
    x = np.clip(np.asarray(x, dtype=np.float64), -30.0, 30.0)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def distance_feature(d_gc):
    """Network input for a camera distance: log(1 + d)."""
    return np.log1p(np.asarray(d_gc, dtype=np.float64))


@dataclass
class ModulatorNet:
    """One hidden tanh layer, scalar output."""

    w1: np.ndarray  # (H, F + 1)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H,)
    b2: np.ndarray  # (1,)

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64).reshape(1)
        hidden = self.w1.shape[0]
        if self.b1.shape != (hidden,) or self.w2.shape != (hidden,):
            raise SceneError("Modulator layer shapes are inconsistent")
        if not all(np.all(np.isfinite(p)) for p in (self.w1, self.b1, self.w2, self.b2)):
            raise SceneError("Modulator weights must be finite")

    def forward(self, z: np.ndarray) -> Tuple[np.ndarray, tuple]:
        """z: (N, F + 1) -> pre-activation (N,)."""
        hidden = np.tanh(z @ self.w1.T + self.b1)
        return hidden @ self.w2 + self.b2[0], (z, hidden)

    def backward(self, cache: tuple, d_out: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        z, hidden = cache
        d_pre = np.outer(d_out, self.w2) * (1.0 - hidden ** 2)
        grads = {
            'w1': d_pre.T @ z,
            'b1': d_pre.sum(axis=0),
            'w2': hidden.T @ d_out,
            'b2': np.array([d_out.sum()]),
        }
        return d_pre @ self.w1, grads

    def copy(self) -> "ModulatorNet":
        return ModulatorNet(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


class AdaptiveModulator:
    """
    Pair of networks F_sca and F_opa with input (feature, log(1 + d_gc)).
    """

    def __init__(self, sca: ModulatorNet, opa: ModulatorNet):
        if sca.w1.shape != opa.w1.shape:
            raise SceneError("F_sca and F_opa must share input and hidden sizes")
        self.sca = sca
        self.opa = opa

    @property
    def feature_dim(self) -> int:
        return self.sca.w1.shape[1] - 1

    @property
    def hidden(self) -> int:
        return self.sca.w1.shape[0]

    @classmethod
    def create(cls, feature_dim: int = 8, hidden: int = 32,
               rng: Optional[np.random.Generator] = None, weight_std: float = 0.1,
               output_bias: float = 0.0) -> "AdaptiveModulator":
        """
        Fresh modulator. Output weights start at zero so every gate starts at
        sigmoid(output_bias); first-layer weights are small random values.
        """
        rng = rng if rng is not None else np.random.default_rng(0)

        def net():
            return ModulatorNet(rng.normal(0.0, weight_std, size=(hidden, feature_dim + 1)),
                                np.zeros(hidden), np.zeros(hidden), np.array([output_bias]))
        return cls(net(), net())

    @classmethod
    def zeros(cls, feature_dim: int = 8, hidden: int = 32) -> "AdaptiveModulator":
        """All-zero weights: every gate is exactly 0.5."""
        def net():
            return ModulatorNet(np.zeros((hidden, feature_dim + 1)), np.zeros(hidden),
                                np.zeros(hidden), np.zeros(1))
        return cls(net(), net())

    @classmethod
    def passthrough(cls, feature_dim: int = 8, hidden: int = 32, bias: float = 20.0) -> "AdaptiveModulator":
        """Gates of sigmoid(bias), i.e. practically 1, independent of input."""
        mod = cls.zeros(feature_dim, hidden)
        mod.sca.b2[0] = bias
        mod.opa.b2[0] = bias
        return mod

    def gates(self, f_sca: np.ndarray, f_opa: np.ndarray, distances: np.ndarray):
        """
        Scale and opacity gates for N Gaussians.

        Returns:
            (gate_sca (N,), gate_opa (N,), cache for gates_backward)
        """
        x = distance_feature(distances)[:, None]
        a_sca, cache_sca = self.sca.forward(np.hstack([f_sca, x]))
        a_opa, cache_opa = self.opa.forward(np.hstack([f_opa, x]))
        g_sca = sigmoid(a_sca)
        g_opa = sigmoid(a_opa)
        return g_sca, g_opa, (cache_sca, cache_opa, g_sca, g_opa, np.asarray(distances, dtype=np.float64))

    def gates_backward(self, cache, d_gate_sca: np.ndarray, d_gate_opa: np.ndarray):
        """
        Back-propagate gate gradients.

        Returns:
            (d_f_sca, d_f_opa, d_distance, parameter gradients keyed like parameters())
        """
        cache_sca, cache_opa, g_sca, g_opa, distances = cache
        dz_sca, grads_sca = self.sca.backward(cache_sca, d_gate_sca * g_sca * (1.0 - g_sca))
        dz_opa, grads_opa = self.opa.backward(cache_opa, d_gate_opa * g_opa * (1.0 - g_opa))
        d_x = dz_sca[:, -1] + dz_opa[:, -1]
        d_dist = d_x / (1.0 + distances)
        grads = {f'modulator.sca_{k}': v for k, v in grads_sca.items()}
        grads.update({f'modulator.opa_{k}': v for k, v in grads_opa.items()})
        return dz_sca[:, :-1], dz_opa[:, :-1], d_dist, grads

    def parameters(self) -> Dict[str, np.ndarray]:
        """Live parameter arrays (updated in place by the optimizer)."""
        params = {}
        for prefix, net in (('sca', self.sca), ('opa', self.opa)):
            params[f'modulator.{prefix}_w1'] = net.w1
            params[f'modulator.{prefix}_b1'] = net.b1
            params[f'modulator.{prefix}_w2'] = net.w2
            params[f'modulator.{prefix}_b2'] = net.b2
        return params

    def copy(self) -> "AdaptiveModulator":
        return AdaptiveModulator(self.sca.copy(), self.opa.copy())


def modulate(g, d_gc: float, mod: AdaptiveModulator) -> Tuple[float, np.ndarray]:
    """
    Effective opacity and scale of one primitive seen from distance d_gc.

    Args:
        g: GaussianPrimitive
        d_gc: camera-to-Gaussian distance (>= 0)
        mod: the scene's AdaptiveModulator

    Returns:
        (effective_opacity, effective_scale (3,))
    """
    if d_gc < 0:
        raise SceneError(f"Camera distance must be >= 0, got {d_gc}")
    g_sca, g_opa, _ = mod.gates(np.atleast_2d(g.f_sca), np.atleast_2d(g.f_opa), np.array([d_gc]))
    return float(g_opa[0] * g.opacity), g_sca[0] * g.scale
