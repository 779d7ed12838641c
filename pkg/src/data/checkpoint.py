"""
Versioned binary scene checkpoints.

Layout (little endian):

    b"PDGS"                       magic
    u32 version                   currently 1
    u32 N F H A M                 Gaussians, feature dim, modulator hidden width,
                                  appearance dim, appearance entries
    f32 arrays                    Gaussian fields, modulator weights, appearance
                                  parameters, each in declared order
    M x (u32 length, utf-8 id)    appearance image ids

Arrays are stored as 32-bit floats, so a save/load round trip is exact for
scenes whose values are float32-representable (any scene that was loaded).
"""

from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from src.errors import CheckpointError, CheckpointVersionError
from src.scene.appearance import AppearanceTable
from src.scene.gaussians import GAUSSIAN_FIELDS, GaussianScene
from src.scene.modulator import AdaptiveModulator, ModulatorNet

MAGIC = b'PDGS'
VERSION = 1
HEADER_COUNTS = 5


def _array_layout(n: int, f: int, h: int, a: int, m: int) -> List[Tuple[str, Tuple[int, ...]]]:
    layout = [
        ('gaussians.mu', (n, 3)),
        ('gaussians.log_scale', (n, 3)),
        ('gaussians.rotation_q', (n, 4)),
        ('gaussians.color', (n, 3)),
        ('gaussians.logit_opacity', (n,)),
        ('gaussians.f_sca', (n, f)),
        ('gaussians.f_opa', (n, f)),
    ]
    for net in ('sca', 'opa'):
        layout += [(f'modulator.{net}_w1', (h, f + 1)), (f'modulator.{net}_b1', (h,)),
                   (f'modulator.{net}_w2', (h,)), (f'modulator.{net}_b2', (1,))]
    layout += [
        ('appearance.embeddings', (m, a)),
        ('appearance.gain_w', (3, a)),
        ('appearance.gain_b', (3,)),
        ('appearance.bias_w', (3, a)),
        ('appearance.bias_b', (3,)),
    ]
    return layout


def encode_checkpoint(scene: GaussianScene) -> bytes:
    counts = (len(scene), scene.feature_dim, scene.modulator.hidden, scene.appearance.dim,
              len(scene.appearance.image_ids))
    params = scene.parameters()
    chunks = [MAGIC, np.array([VERSION, *counts], dtype='<u4').tobytes()]
    for name, shape in _array_layout(*counts):
        arr = np.asarray(params[name])
        if arr.shape != shape:
            raise CheckpointError(f"Parameter {name} has shape {arr.shape}, expected {shape}")
        chunks.append(arr.astype('<f4').tobytes())
    for image_id in scene.appearance.image_ids:
        raw = image_id.encode('utf-8')
        chunks.append(np.array([len(raw)], dtype='<u4').tobytes())
        chunks.append(raw)
    return b''.join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.data):
            raise CheckpointError(f"Checkpoint truncated while reading {what} at byte {self.pos}")
        out = self.data[self.pos:self.pos + size]
        self.pos += size
        return out

    def u32(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(4 * count, what), dtype='<u4').astype(np.int64)

    def f32(self, shape: Tuple[int, ...], what: str) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype='<f4').astype(np.float64).reshape(shape)


def decode_checkpoint(data: bytes) -> GaussianScene:
    """
    Raises:
        CheckpointError: bad magic, truncation or trailing bytes
        CheckpointVersionError: version newer than this reader
    """
    reader = _Reader(data)
    if reader.take(4, 'magic') != MAGIC:
        raise CheckpointError("Not a scene checkpoint (bad magic)")
    version = int(reader.u32(1, 'version')[0])
    if version > VERSION:
        raise CheckpointVersionError(f"Checkpoint version {version} is newer than supported {VERSION}")
    if version < 1:
        raise CheckpointError(f"Invalid checkpoint version {version}")
    n, f, h, a, m = (int(x) for x in reader.u32(HEADER_COUNTS, 'counts'))
    arrays = {name: reader.f32(shape, name) for name, shape in _array_layout(n, f, h, a, m)}
    image_ids = []
    for i in range(m):
        length = int(reader.u32(1, f'image id {i} length')[0])
        try:
            image_ids.append(reader.take(length, f'image id {i}').decode('utf-8'))
        except UnicodeDecodeError as e:
            raise CheckpointError(f"Image id {i} is not valid utf-8") from e
    if reader.pos != len(data):
        raise CheckpointError(f"{len(data) - reader.pos} trailing bytes after checkpoint payload")

    def net(prefix: str) -> ModulatorNet:
        return ModulatorNet(*(arrays[f'modulator.{prefix}_{k}'] for k in ('w1', 'b1', 'w2', 'b2')))

    appearance = AppearanceTable(image_ids, arrays['appearance.embeddings'], arrays['appearance.gain_w'],
                                 arrays['appearance.gain_b'], arrays['appearance.bias_w'],
                                 arrays['appearance.bias_b'])
    return GaussianScene(*(arrays[f'gaussians.{name}'] for name in GAUSSIAN_FIELDS),
                         modulator=AdaptiveModulator(net('sca'), net('opa')), appearance=appearance)


def save_checkpoint(scene: GaussianScene, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(scene))
    return path


def load_checkpoint(path: Union[str, Path]) -> GaussianScene:
    return decode_checkpoint(Path(path).read_bytes())
