"""
Epipolar attention masks and the asymmetric causal block mask.

Token layout is row-major over a TokenGrid: token index = row * cols + col.
A token's pixel position is the center of its patch.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from src.errors import MaskError
from src.geometry import CameraIntrinsics, CameraPose, epipolar_lines, fundamental_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TokenGrid:
    """Token layout of one view."""

    rows: int
    cols: int
    patch_h: int
    patch_w: int

    def __post_init__(self):
        if min(self.rows, self.cols, self.patch_h, self.patch_w) < 1:
            raise MaskError("Token grid dimensions must be positive")

    @classmethod
    def for_image(cls, intr: CameraIntrinsics, rows: int = 32, cols: int = 32) -> "TokenGrid":
        """Grid of rows x cols tokens covering an image exactly."""
        if intr.height % rows or intr.width % cols:
            raise MaskError(
                f"{intr.width}x{intr.height} image is not divisible into {cols}x{rows} tokens"
            )
        return cls(rows, cols, intr.height // rows, intr.width // cols)

    @property
    def num_tokens(self) -> int:
        return self.rows * self.cols

    @property
    def image_size(self) -> Tuple[int, int]:
        """(width, height) in pixels."""
        return self.cols * self.patch_w, self.rows * self.patch_h

    @property
    def half_diagonal(self) -> float:
        return 0.5 * float(np.hypot(self.patch_h, self.patch_w))

    def token_centers(self) -> np.ndarray:
        """(rows*cols, 2) pixel centers (u, v) in token order."""
        rr, cc = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        u = cc * self.patch_w + (self.patch_w - 1) / 2.0
        v = rr * self.patch_h + (self.patch_h - 1) / 2.0
        return np.stack([u.ravel(), v.ravel()], axis=-1).astype(np.float64)

    def token_of_pixel(self, pixel) -> int:
        """Index of the token containing a pixel position."""
        col = int(np.clip(np.floor((float(pixel[0]) + 0.5) / self.patch_w), 0, self.cols - 1))
        row = int(np.clip(np.floor((float(pixel[1]) + 0.5) / self.patch_h), 0, self.rows - 1))
        return row * self.cols + col


@dataclass(frozen=True)
class EpipolarMask:
    """
    Binary novel-token x reference-token attention support.

    Attributes:
        bits: (n, n) boolean array, rows are novel tokens
        grid: token layout shared by both views
        dilation_radius: square dilation half-width applied, in tokens
        misses: novel tokens whose epipolar line hits no reference token
        fallbacks: novel tokens at the epipole, given a full row of ones
        pose_source: free-form label for where the poses came from
    """

    bits: np.ndarray
    grid: TokenGrid
    dilation_radius: int = 0
    misses: Tuple[int, ...] = ()
    fallbacks: Tuple[int, ...] = ()
    pose_source: str = "unspecified"

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        n = self.grid.num_tokens
        if bits.shape != (n, n):
            raise MaskError(f"Epipolar mask must be {n}x{n}, got {bits.shape}")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def row_image(self, token: int) -> np.ndarray:
        """Reference-token support of one novel token as a rows x cols image."""
        return self.bits[token].reshape(self.grid.rows, self.grid.cols)


@dataclass(frozen=True)
class CausalBlockMask:
    """[[1, mask], [0, 1]] over [novel tokens | reference tokens]."""

    bits: np.ndarray
    n: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (2 * self.n, 2 * self.n):
            raise MaskError(f"Causal mask must be {2 * self.n}x{2 * self.n}, got {bits.shape}")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def epipolar_block(self) -> np.ndarray:
        return self.bits[:self.n, self.n:]


def dilate_mask(bits: np.ndarray, radius: int) -> np.ndarray:
    """
    Square dilation over the last two axes, clipped at the borders.

    Args:
        bits: (..., rows, cols) binary array
        radius: half-width of the structuring element; 0 is the identity
    """
    if radius < 0:
        raise MaskError(f"Dilation radius must be >= 0, got {radius}")
    arr = np.asarray(bits, dtype=bool)
    if arr.ndim < 2:
        raise MaskError("Dilation needs at least a 2-D mask")
    if radius == 0:
        return arr.copy()
    size = 2 * radius + 1
    structure = np.ones((1,) * (arr.ndim - 2) + (size, size), dtype=bool)
    return ndimage.binary_dilation(arr, structure=structure, border_value=0)


def build_epipolar_mask(novel_cam: Tuple[CameraIntrinsics, CameraPose],
                        ref_cam: Tuple[CameraIntrinsics, CameraPose],
                        grid: TokenGrid,
                        band_px: Optional[float] = None,
                        dilation_radius: int = 1,
                        pose_source: str = "unspecified") -> EpipolarMask:
    """
    Reference mask: for every novel token, the reference tokens near its epipolar line.

    Args:
        novel_cam: (intrinsics, pose) of the novel view
        ref_cam: (intrinsics, pose) of the reference view
        grid: token grid used for both views
        band_px: max pixel distance from token center to line; defaults to half
                 the patch diagonal
        dilation_radius: dilation applied in reference-token space
        pose_source: label recorded on the mask (e.g. 'sfm', 'ground-truth')

    Returns:
        EpipolarMask with misses and epipole fallbacks recorded
    """
    intr_n, pose_n = novel_cam
    intr_r, pose_r = ref_cam
    band = grid.half_diagonal if band_px is None else float(band_px)
    if band < 0:
        raise MaskError(f"band_px must be >= 0, got {band}")
    f = fundamental_matrix(intr_n, pose_n, intr_r, pose_r)

    centers = grid.token_centers()
    lines = epipolar_lines(f, centers)
    norms = np.hypot(lines[:, 0], lines[:, 1])
    scale = np.maximum(1.0, np.abs(lines).max(axis=1))
    at_epipole = norms < 1e-12 * scale
    safe = np.where(at_epipole, 1.0, norms)
    lines = lines / safe[:, None]

    ref_h = np.hstack([centers, np.ones((centers.shape[0], 1))])
    distances = np.abs(lines @ ref_h.T)
    # slack keeps band = half diagonal inclusive under rounding
    bits = distances <= band + 1e-9
    bits[at_epipole] = True
    fallbacks = tuple(int(i) for i in np.flatnonzero(at_epipole))
    if fallbacks:
        logger.info("Epipole-coincident tokens given full rows", extra={"tokens": list(fallbacks)})

    misses = tuple(int(i) for i in np.flatnonzero(~bits.any(axis=1)))
    stacked = bits.reshape(grid.num_tokens, grid.rows, grid.cols)
    dilated = dilate_mask(stacked, dilation_radius).reshape(grid.num_tokens, grid.num_tokens)
    return EpipolarMask(dilated, grid, dilation_radius, misses, fallbacks, pose_source)


def assemble_causal_mask(e: EpipolarMask) -> CausalBlockMask:
    """Lay out [[1, mask], [0, 1]] over [novel | reference] tokens."""
    n = e.grid.num_tokens
    bits = np.zeros((2 * n, 2 * n), dtype=bool)
    bits[:n, :n] = True
    bits[:n, n:] = e.bits
    bits[n:, n:] = True
    return CausalBlockMask(bits, n)
