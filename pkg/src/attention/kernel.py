"""
Reference masked-attention kernel for the causal block mask.
"""

import numpy as np

from src.errors import MaskError
from .masks import CausalBlockMask


def masked_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                     mask: CausalBlockMask, literal_product: bool = False) -> np.ndarray:
    """
    Scaled dot-product attention under a binary mask.

    Masked positions are excluded from each row's softmax, so their keys and
    values never reach the output. With literal_product=True the mask instead
    multiplies the logits elementwise (masked logits become 0 and still take
    part in the softmax); that variant exists for comparison only.

    Args:
        q, k, v: (2n, d) matrices ordered [novel | reference]
        mask: causal block mask over the same 2n tokens
        literal_product: use the elementwise-product interpretation

    Returns:
        (2n, d) attention output
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    bits = mask.bits
    tokens = bits.shape[0]
    if q.ndim != 2 or q.shape[1] < 1:
        raise MaskError("Q must be a (tokens, d) matrix with d >= 1")
    if q.shape[0] != tokens or k.shape != q.shape or v.shape[0] != tokens:
        raise MaskError(f"Q/K/V must have {tokens} rows matching the mask")

    if literal_product:
        logits = (q @ k.T) / np.sqrt(q.shape[1]) * bits
        logits = logits - logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        weights /= weights.sum(axis=1, keepdims=True)
        return weights @ v

    empty = np.flatnonzero(~bits.any(axis=1))
    if empty.size:
        raise MaskError(f"Mask rows {empty.tolist()} have no set bit; softmax undefined")

    scale = 1.0 / np.sqrt(q.shape[1])
    out = np.empty((tokens, v.shape[1]))
    # rows only ever touch their own support, so masked keys/values cannot leak in
    for i in range(tokens):
        support = np.flatnonzero(bits[i])
        logits = (k[support] @ q[i]) * scale
        weights = np.exp(logits - logits.max())
        weights /= weights.sum()
        out[i] = weights @ v[support]
    return out


def attention_weights(q: np.ndarray, k: np.ndarray, mask: CausalBlockMask) -> np.ndarray:
    """Row-softmax weights with masked entries exactly zero."""
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    logits = (q @ k.T) / np.sqrt(q.shape[1])
    logits = np.where(mask.bits, logits, -np.inf)
    if not mask.bits.any(axis=1).all():
        raise MaskError("Mask has an all-zero row; softmax undefined")
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)
