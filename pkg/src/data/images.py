"""
8-bit image I/O (PNG and portable pixmaps) through Pillow.

In memory images are float arrays in [0, 1] shaped (H, W, 3).
"""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from src.errors import ParseError

PathLike = Union[str, Path]


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def read_image(path: PathLike) -> np.ndarray:
    """Read PNG/PPM/PGM (or anything Pillow opens) as float RGB in [0, 1]."""
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert('RGB'), dtype=np.float64)
    except (OSError, ValueError) as e:
        raise ParseError(f"Cannot read image: {e}", source=str(path)) from e
    return rgb / 255.0


def write_image(path: PathLike, image: np.ndarray) -> Path:
    """
    Write an RGB image; the format follows the suffix (.png, .ppm).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"Expected (H, W, 3) image, got {arr.shape}")
    Image.fromarray(to_uint8(arr)).save(path)
    return path


def write_graymap(path: PathLike, image: np.ndarray) -> Path:
    """Write a single-channel image in [0, 1] (PGM or PNG by suffix)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"Expected (H, W) image, got {arr.shape}")
    Image.fromarray(to_uint8(arr)).save(path)
    return path
