"""
Attention module initialization
"""

from .masks import (
    TokenGrid,
    EpipolarMask,
    CausalBlockMask,
    build_epipolar_mask,
    assemble_causal_mask,
    dilate_mask,
)
from .kernel import masked_attention, attention_weights

__all__ = [
    'TokenGrid',
    'EpipolarMask',
    'CausalBlockMask',
    'build_epipolar_mask',
    'assemble_causal_mask',
    'dilate_mask',
    'masked_attention',
    'attention_weights',
]
