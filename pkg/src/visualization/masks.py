"""
Epipolar mask debugging images.

Each novel token's row of the reference mask is drawn at reference-image resolution:
white where the token may attend, black elsewhere.
"""

from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np

from src.attention.masks import EpipolarMask
from src.data.images import write_graymap, write_image
from src.errors import MaskError


def mask_row_image(mask: EpipolarMask, token: int) -> np.ndarray:
    """Support of one novel token, upsampled to (H, W) pixels, values in {0, 1}."""
    if not 0 <= token < mask.grid.num_tokens:
        raise MaskError(f"Token {token} out of range [0, {mask.grid.num_tokens})")
    cell = np.ones((mask.grid.patch_h, mask.grid.patch_w))
    return np.kron(mask.row_image(token).astype(np.float64), cell)


def mask_overlay(mask: EpipolarMask, token: int, reference: np.ndarray, dim: float = 0.3) -> np.ndarray:
    """Reference image with pixels outside the token's support darkened to `dim`."""
    support = mask_row_image(mask, token)
    reference = np.asarray(reference, dtype=np.float64)
    if reference.shape[:2] != support.shape:
        raise MaskError(f"Reference image {reference.shape[:2]} does not match token grid {support.shape}")
    return reference * (dim + (1.0 - dim) * support)[..., None]


def write_mask_rows(directory: Union[str, Path], mask: EpipolarMask, tokens: Optional[Iterable[int]] = None,
                    reference: Optional[np.ndarray] = None) -> List[Path]:
    """
    Write one graymap per novel token (all tokens when none are given), plus a
    PPM overlay on the reference image when one is passed.

    Returns:
        Paths of the written files
    """
    directory = Path(directory)
    tokens = range(mask.grid.num_tokens) if tokens is None else tokens
    written = []
    for token in tokens:
        written.append(write_graymap(directory / f"row_{token:04d}.pgm", mask_row_image(mask, token)))
        if reference is not None:
            written.append(write_image(directory / f"overlay_{token:04d}.ppm", mask_overlay(mask, token, reference)))
    return written
