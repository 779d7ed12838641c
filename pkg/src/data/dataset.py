"""
Dataset directories: a COLMAP text model, images, an optional point cloud and
a YAML split manifest.

    <root>/cameras.txt, images.txt, [points3D.txt]
    <root>/points.ply            optional, preferred over points3D.txt
    <root>/images/<NAME>         image files named as in images.txt
    <root>/splits.yaml           {train-aerial: [names], eval-ground: [names]}
    <root>/gt_scene.pdgs         optional hidden scene (synthetic datasets)
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import yaml

from src.errors import ParseError
from src.geometry.cameras import CameraIntrinsics
from src.scene.gaussians import GaussianScene
from .checkpoint import load_checkpoint, save_checkpoint
from .colmap import ColmapImage, read_colmap_model, write_colmap_model
from .images import read_image, write_image
from .ply import read_ply_points, write_ply_points

logger = logging.getLogger(__name__)

TRAIN_SPLIT = 'train-aerial'
EVAL_SPLIT = 'eval-ground'
SPLITS = (TRAIN_SPLIT, EVAL_SPLIT)
SPLITS_FILE = 'splits.yaml'
POINTS_FILE = 'points.ply'
IMAGES_DIR = 'images'
GT_SCENE_FILE = 'gt_scene.pdgs'


@dataclass
class DatasetBundle:
    """
    Cameras, posed images, the initialization point cloud and split labels.

    Attributes:
        root: dataset directory
        cameras: intrinsics by COLMAP camera id
        images: posed images by COLMAP image id
        points: (N, 3) positions or None
        colors: (N, 3) colors in [0, 1] or None
        splits: image name -> split label
        gt_scene: hidden ground-truth scene when the dataset ships one
    """

    root: Path
    cameras: Dict[int, CameraIntrinsics]
    images: Dict[int, ColmapImage]
    points: Optional[np.ndarray] = None
    colors: Optional[np.ndarray] = None
    splits: Dict[str, str] = field(default_factory=dict)
    gt_scene: Optional[GaussianScene] = None

    def split(self, label: str) -> List[ColmapImage]:
        """Images with the given split label, ordered by image id."""
        if label not in SPLITS:
            raise ValueError(f"Unknown split '{label}', expected one of {SPLITS}")
        return [img for _, img in sorted(self.images.items()) if self.splits.get(img.name) == label]

    def intrinsics(self, image: ColmapImage) -> CameraIntrinsics:
        return self.cameras[image.camera_id]

    def image_path(self, image: ColmapImage) -> Path:
        return self.root / IMAGES_DIR / image.name

    def load_pixels(self, image: ColmapImage) -> np.ndarray:
        """
        Raises:
            ParseError: unreadable file or size that disagrees with the camera
        """
        path = self.image_path(image)
        pixels = read_image(path)
        intr = self.intrinsics(image)
        if pixels.shape[:2] != (intr.height, intr.width):
            raise ParseError(f"Image is {pixels.shape[1]}x{pixels.shape[0]}, camera {image.camera_id} "
                             f"expects {intr.width}x{intr.height}", source=str(path))
        return pixels


def parse_splits(text: str, known_names: List[str], source: str = "") -> Dict[str, str]:
    """
    Parse the split manifest.

    Returns:
        image name -> split label

    Raises:
        ParseError: unknown split label, unknown image or an image in two splits
    """
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ParseError(f"Invalid YAML: {e}", source=source) from e
    if not isinstance(data, dict):
        raise ParseError("Split manifest must be a mapping of split -> image names", source=source)
    known = set(known_names)
    assignment: Dict[str, str] = {}
    for label, names in data.items():
        if label not in SPLITS:
            raise ParseError(f"Unknown split '{label}'", source=source)
        for name in names or []:
            name = str(name)
            if name not in known:
                raise ParseError(f"Split '{label}' lists unknown image '{name}'", source=source)
            if name in assignment:
                raise ParseError(f"Image '{name}' is in both '{assignment[name]}' and '{label}'", source=source)
            assignment[name] = label
    return assignment


def load_dataset(root: Union[str, Path]) -> DatasetBundle:
    """
    Load a dataset directory.

    Without a split manifest every image is a training (aerial) image.
    """
    root = Path(root)
    cameras, images, points = read_colmap_model(root)
    names = [img.name for img in images.values()]
    splits_path = root / SPLITS_FILE
    if splits_path.exists():
        splits = parse_splits(splits_path.read_text(encoding='utf-8'), names, str(splits_path))
        unassigned = [n for n in names if n not in splits]
        if unassigned:
            logger.warning("Images without a split are ignored", extra={"count": len(unassigned)})
    else:
        splits = {name: TRAIN_SPLIT for name in names}

    positions = colors = None
    ply_path = root / POINTS_FILE
    if ply_path.exists():
        positions, colors = read_ply_points(ply_path)
    elif points is not None:
        positions, colors = points

    gt_path = root / GT_SCENE_FILE
    gt_scene = load_checkpoint(gt_path) if gt_path.exists() else None
    logger.info("Loaded dataset", extra={"root": str(root), "cameras": len(cameras), "images": len(images),
                                         "points": 0 if positions is None else len(positions)})
    return DatasetBundle(root, cameras, images, positions, colors, splits, gt_scene)


def write_dataset(root: Union[str, Path], cameras: Dict[int, CameraIntrinsics], images: Dict[int, ColmapImage],
                  pixels: Dict[int, np.ndarray], splits: Dict[str, str],
                  positions: Optional[np.ndarray] = None, colors: Optional[np.ndarray] = None,
                  gt_scene: Optional[GaussianScene] = None) -> Path:
    """
    Write a dataset directory that `load_dataset` reads back.

    Args:
        pixels: image arrays keyed by image id
        splits: image name -> split label
    """
    root = Path(root)
    write_colmap_model(root, cameras, images)
    for image_id, img in images.items():
        write_image(root / IMAGES_DIR / img.name, pixels[image_id])
    manifest: Dict[str, List[str]] = {label: [] for label in SPLITS}
    for name, label in splits.items():
        manifest[label].append(name)
    (root / SPLITS_FILE).write_text(yaml.safe_dump(manifest, sort_keys=False), encoding='utf-8')
    if positions is not None:
        write_ply_points(root / POINTS_FILE, positions, colors, binary=True)
    if gt_scene is not None:
        save_checkpoint(gt_scene, root / GT_SCENE_FILE)
    return root
