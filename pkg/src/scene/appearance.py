"""
Per-image appearance embeddings.

Each training image owns an embedding vector; a shared linear decoder maps it
to a per-channel affine color transform (gain = exp(W_g e + b_g),
bias = W_b e + b_b) applied to rendered colors.
"""

from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.errors import SceneError


class AppearanceTable:
    """
    Embedding table plus the shared decoder.

    Attributes:
        image_ids: registered image identifiers, row order of `embeddings`
        embeddings: (M, A) per-image vectors
        gain_w, gain_b: decoder weights for the log-gain
        bias_w, bias_b: decoder weights for the additive bias
    """

    def __init__(self, image_ids: Iterable[str], embeddings: np.ndarray,
                 gain_w: np.ndarray, gain_b: np.ndarray,
                 bias_w: np.ndarray, bias_b: np.ndarray):
        self.image_ids: List[str] = [str(i) for i in image_ids]
        if len(set(self.image_ids)) != len(self.image_ids):
            raise SceneError("Duplicate appearance image ids")
        dim = np.asarray(gain_w).shape[-1]
        self.embeddings = np.asarray(embeddings, dtype=np.float64).reshape(len(self.image_ids), dim)
        self.gain_w = np.asarray(gain_w, dtype=np.float64)
        self.gain_b = np.asarray(gain_b, dtype=np.float64)
        self.bias_w = np.asarray(bias_w, dtype=np.float64)
        self.bias_b = np.asarray(bias_b, dtype=np.float64)
        if self.gain_w.shape != (3, dim) or self.bias_w.shape != (3, dim) \
                or self.gain_b.shape != (3,) or self.bias_b.shape != (3,):
            raise SceneError("Appearance decoder shapes are inconsistent")
        self._index = {name: i for i, name in enumerate(self.image_ids)}

    @classmethod
    def create(cls, image_ids: Iterable[str] = (), dim: int = 16,
               rng: Optional[np.random.Generator] = None, embedding_std: float = 0.01) -> "AppearanceTable":
        """Table with small random embeddings and a zero (identity) decoder."""
        rng = rng if rng is not None else np.random.default_rng(0)
        ids = [str(i) for i in image_ids]
        return cls(ids, rng.normal(0.0, embedding_std, size=(len(ids), dim)),
                   np.zeros((3, dim)), np.zeros(3), np.zeros((3, dim)), np.zeros(3))

    @property
    def dim(self) -> int:
        return self.gain_w.shape[1]

    def index(self, image_id: str) -> int:
        try:
            return self._index[str(image_id)]
        except KeyError:
            raise SceneError(f"Unknown appearance image id '{image_id}'") from None

    def affine(self, image_id: str) -> Tuple[np.ndarray, np.ndarray]:
        """(gain (3,), bias (3,)) for a registered image."""
        e = self.embeddings[self.index(image_id)]
        return np.exp(self.gain_w @ e + self.gain_b), self.bias_w @ e + self.bias_b

    def apply(self, image: np.ndarray, image_id: Optional[str]):
        """
        Apply the image's color transform, clamped to [0, 1].

        Returns:
            (transformed image, cache for backward); identity when image_id is None.
        """
        if image_id is None:
            return image, None
        row = self.index(image_id)
        gain, bias = self.affine(image_id)
        raw = image * gain + bias
        return np.clip(raw, 0.0, 1.0), (row, image, gain, raw)

    def backward(self, cache, d_out: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        """Gradients w.r.t. the untransformed image and the table parameters."""
        grads = {k: np.zeros_like(v) for k, v in self.parameters().items()}
        if cache is None:
            return d_out, grads
        row, image, gain, raw = cache
        inside = (raw > 0.0) & (raw < 1.0)
        d_raw = np.where(inside, d_out, 0.0)
        axes = tuple(range(d_raw.ndim - 1))
        d_gain = (d_raw * image).sum(axis=axes)
        d_bias = d_raw.sum(axis=axes)
        d_log_gain = d_gain * gain
        e = self.embeddings[row]
        grads['appearance.gain_w'] = np.outer(d_log_gain, e)
        grads['appearance.gain_b'] = d_log_gain
        grads['appearance.bias_w'] = np.outer(d_bias, e)
        grads['appearance.bias_b'] = d_bias
        grads['appearance.embeddings'][row] = self.gain_w.T @ d_log_gain + self.bias_w.T @ d_bias
        return d_raw * gain, grads

    def parameters(self) -> Dict[str, np.ndarray]:
        return {
            'appearance.embeddings': self.embeddings,
            'appearance.gain_w': self.gain_w,
            'appearance.gain_b': self.gain_b,
            'appearance.bias_w': self.bias_w,
            'appearance.bias_b': self.bias_b,
        }

    def copy(self) -> "AppearanceTable":
        return AppearanceTable(list(self.image_ids), self.embeddings.copy(), self.gain_w.copy(),
                               self.gain_b.copy(), self.bias_w.copy(), self.bias_b.copy())


def apply_appearance(color, image_id: str, table: AppearanceTable) -> np.ndarray:
    """
    Color adaptation for one registered image: gain * color + bias, clamped.

    Raises:
        SceneError: if image_id is not registered
    """
    out, _ = table.apply(np.asarray(color, dtype=np.float64), image_id)
    return out
