"""
Adam over named parameter arrays.

Parameters are updated in place; moment estimates are keyed by parameter
name so Gaussian rows can be pruned from the state alongside the scene.
"""

from typing import Callable, Dict

import numpy as np


class Adam:
    """
    Adaptive moment estimation with a per-parameter step size.

    Args:
        learning_rate: maps a parameter name to its step size
        beta1, beta2: moment decay rates
        eps: denominator floor
    """

    def __init__(self, learning_rate: Callable[[str], float], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-15):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, param in params.items():
            g = grads.get(name)
            if g is None:
                continue
            if name not in self.m or self.m[name].shape != param.shape:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            lr = self.learning_rate(name)
            param -= (lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)

    def prune(self, keep: np.ndarray, prefix: str = 'gaussians.') -> None:
        """Drop moment rows of removed Gaussians."""
        for name in list(self.m):
            if name.startswith(prefix) and self.m[name].shape[0] == keep.shape[0]:
                self.m[name] = self.m[name][keep].copy()
                self.v[name] = self.v[name][keep].copy()
