"""
PLY point clouds (ascii and binary_little_endian).

Only the vertex element is read: x, y, z and optional red, green, blue.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from src.errors import ParseError

PLY_TYPES = {
    'char': 'i1', 'int8': 'i1', 'uchar': 'u1', 'uint8': 'u1',
    'short': 'i2', 'int16': 'i2', 'ushort': 'u2', 'uint16': 'u2',
    'int': 'i4', 'int32': 'i4', 'uint': 'u4', 'uint32': 'u4',
    'float': 'f4', 'float32': 'f4', 'double': 'f8', 'float64': 'f8',
}
FORMATS = ('ascii', 'binary_little_endian')


@dataclass
class _Element:
    name: str
    count: int
    properties: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def dtype(self) -> np.dtype:
        return np.dtype([(name, '<' + code) for name, code in self.properties])


def _parse_header(data: bytes, source: str):
    end = data.find(b'end_header')
    if not data.startswith(b'ply') or end < 0:
        raise ParseError("Not a PLY file (missing 'ply' magic or 'end_header')", source=source)
    newline = data.find(b'\n', end)
    body_start = len(data) if newline < 0 else newline + 1
    try:
        header_text = data[:end].decode('ascii')
    except UnicodeDecodeError as e:
        raise ParseError(f"PLY header is not ASCII: {e}", source=source) from e

    fmt = None
    elements: List[_Element] = []
    for lineno, raw in enumerate(header_text.splitlines(), start=1):
        toks = raw.split()
        if not toks or toks[0] in ('ply', 'comment', 'obj_info'):
            continue
        if toks[0] == 'format':
            if len(toks) < 2 or toks[1] not in FORMATS:
                raise ParseError(f"Unsupported PLY format '{' '.join(toks[1:])}'", lineno, source)
            fmt = toks[1]
        elif toks[0] == 'element':
            try:
                count = int(toks[2])
                name = toks[1]
            except (IndexError, ValueError) as e:
                raise ParseError(f"Malformed element line '{raw}'", lineno, source) from e
            if count < 0:
                raise ParseError(f"Negative element count in '{raw}'", lineno, source)
            elements.append(_Element(name, count))
        elif toks[0] == 'property':
            if not elements:
                raise ParseError("Property before any element", lineno, source)
            if len(toks) >= 2 and toks[1] == 'list':
                raise ParseError(f"List property in element '{elements[-1].name}' is not supported",
                                 lineno, source)
            if len(toks) != 3 or toks[1] not in PLY_TYPES:
                raise ParseError(f"Malformed property line '{raw}'", lineno, source)
            elements[-1].properties.append((toks[2], PLY_TYPES[toks[1]]))
        else:
            raise ParseError(f"Unexpected header line '{raw}'", lineno, source)
    if fmt is None:
        raise ParseError("PLY header has no format line", source=source)
    return fmt, elements, body_start


def _read_ascii(body: bytes, elements: List[_Element], source: str) -> np.ndarray:
    lines = body.decode('ascii', errors='replace').splitlines()
    cursor = 0
    for element in elements:
        rows = []
        for i in range(element.count):
            if cursor >= len(lines):
                raise ParseError(f"Truncated ascii payload in element '{element.name}' "
                                 f"({i} of {element.count} rows)", source=source)
            toks = lines[cursor].split()
            cursor += 1
            if element.name != 'vertex':
                continue
            if len(toks) != len(element.properties):
                raise ParseError(f"Vertex row has {len(toks)} values, expected {len(element.properties)}",
                                 cursor, source)
            try:
                rows.append(tuple(float(t) for t in toks))
            except ValueError as e:
                raise ParseError(f"Malformed vertex row: {e}", cursor, source) from e
        if element.name == 'vertex':
            out = np.zeros(element.count, dtype=element.dtype)
            for j, (name, _) in enumerate(element.properties):
                out[name] = [r[j] for r in rows]
            return out
    raise ParseError("PLY file has no vertex element", source=source)


def _read_binary(body: bytes, elements: List[_Element], source: str, offset: int) -> np.ndarray:
    cursor = 0
    for element in elements:
        dtype = element.dtype
        size = dtype.itemsize * element.count
        if cursor + size > len(body):
            raise ParseError(f"Truncated binary payload in element '{element.name}' at byte "
                             f"{offset + cursor}: need {size} bytes, have {len(body) - cursor}", source=source)
        if element.name == 'vertex':
            if element.count == 0:
                return np.zeros(0, dtype=dtype)
            return np.frombuffer(body, dtype=dtype, count=element.count, offset=cursor)
        cursor += size
    raise ParseError("PLY file has no vertex element", source=source)


def parse_ply_points(data: bytes, source: str = "") -> Tuple[np.ndarray, np.ndarray]:
    """
    Parse a PLY point cloud.

    Returns:
        (positions (N, 3) float64, colors (N, 3) in [0, 1]; mid-gray when absent)

    Raises:
        ParseError: missing x/y/z, unsupported layout or truncated payload
    """
    fmt, elements, body_start = _parse_header(data, source)
    vertex = next((e for e in elements if e.name == 'vertex'), None)
    if vertex is None:
        raise ParseError("PLY file has no vertex element", source=source)
    names = [name for name, _ in vertex.properties]
    missing = [axis for axis in ('x', 'y', 'z') if axis not in names]
    if missing:
        raise ParseError(f"Vertex element lacks properties {missing}", source=source)

    body = data[body_start:]
    table = _read_ascii(body, elements, source) if fmt == 'ascii' else \
        _read_binary(body, elements, source, body_start)
    positions = np.column_stack([table[a].astype(np.float64) for a in ('x', 'y', 'z')]).reshape(-1, 3)
    if all(c in names for c in ('red', 'green', 'blue')):
        codes = dict(vertex.properties)
        channels = []
        for c in ('red', 'green', 'blue'):
            values = table[c].astype(np.float64)
            if codes[c] == 'u1':
                values = values / 255.0
            elif codes[c] == 'u2':
                values = values / 65535.0
            channels.append(values)
        colors = np.clip(np.column_stack(channels), 0.0, 1.0).reshape(-1, 3)
    else:
        colors = np.full_like(positions, 0.5)
    return positions, colors


def read_ply_points(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    return parse_ply_points(path.read_bytes(), source=str(path))


def format_ply_points(positions: np.ndarray, colors: Optional[np.ndarray] = None,
                      binary: bool = False) -> bytes:
    """Serialize points as double x/y/z plus uchar colors."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = positions.shape[0]
    props = [('x', 'f8'), ('y', 'f8'), ('z', 'f8')]
    if colors is not None:
        props += [('red', 'u1'), ('green', 'u1'), ('blue', 'u1')]
    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0", f"element vertex {n}"]
    header += [f"property {'double' if code == 'f8' else 'uchar'} {name}" for name, code in props]
    header += ["end_header"]
    head = ('\n'.join(header) + '\n').encode('ascii')

    table = np.zeros(n, dtype=np.dtype([(name, '<' + code) for name, code in props]))
    for i, axis in enumerate('xyz'):
        table[axis] = positions[:, i]
    if colors is not None:
        rgb = np.clip(np.rint(np.asarray(colors, dtype=np.float64).reshape(-1, 3) * 255), 0, 255)
        for i, c in enumerate(('red', 'green', 'blue')):
            table[c] = rgb[:, i]
    if binary:
        return head + table.tobytes()
    rows = []
    for row in table:
        rows.append(' '.join(repr(float(row[name])) if code == 'f8' else str(int(row[name]))
                             for name, code in props))
    return head + ('\n'.join(rows) + ('\n' if rows else '')).encode('ascii')


def write_ply_points(path: Union[str, Path], positions: np.ndarray, colors: Optional[np.ndarray] = None,
                     binary: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(format_ply_points(positions, colors, binary))
    return path
