"""PGM images and the FBIT tensor container.

FBIT layout, little-endian: b'FBIT' | version u32 | ndim u32 | dims u64*ndim | float32 payload.
FBIC checkpoints: b'FBIC' | version u32 | count u32, then per record
u32 name length, UTF-8 name, one FBIT block.
"""
import io
import logging
import os
import struct
import tempfile
from typing import Dict

import numpy as np

from errors import FormatError

logger = logging.getLogger(__name__)

TENSOR_MAGIC = b'FBIT'
CHECKPOINT_MAGIC = b'FBIC'
VERSION = 1


def atomic_write(path: str, data: bytes):
    """Write to a temporary sibling, then rename over `path`"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_csv(table, path: str):
    """pandas table as CSV through `atomic_write`"""
    atomic_write(path, table.to_csv(index=False).encode('utf-8'))


# PGM

def _read_token(data: bytes, pos: int):
    while pos < len(data):
        if data[pos:pos + 1] == b'#':
            while pos < len(data) and data[pos:pos + 1] not in (b'\n', b'\r'):
                pos += 1
        elif data[pos:pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b'#':
        pos += 1
    if start == pos:
        raise FormatError("PGM header ends early")
    return data[start:pos], pos


def decode_pgm(data: bytes) -> np.ndarray:
    magic, pos = _read_token(data, 0)
    if magic != b'P5':
        raise FormatError(f"not a binary PGM (magic {magic!r})")
    try:
        width, pos = _read_token(data, pos)
        height, pos = _read_token(data, pos)
        maxval, pos = _read_token(data, pos)
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError as e:
        raise FormatError(f"malformed PGM header: {e}")
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise FormatError(f"invalid PGM header {width}x{height} maxval {maxval}")
    pos += 1
    dtype = np.dtype('>u2') if maxval > 255 else np.dtype('u1')
    expected = width * height * dtype.itemsize
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise FormatError(f"truncated PGM raster: {len(raster)} of {expected} bytes")
    values = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return values.astype(np.float64) / maxval


def encode_pgm(image: np.ndarray, bit_depth: int = 16) -> bytes:
    if bit_depth not in (8, 16):
        raise FormatError(f"PGM bit depth must be 8 or 16, got {bit_depth}")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise FormatError(f"PGM holds one 2-D channel, got shape {image.shape}")
    maxval = 255 if bit_depth == 8 else 65535
    samples = np.rint(np.clip(image, 0.0, 1.0) * maxval)
    dtype = 'u1' if bit_depth == 8 else '>u2'
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode('ascii')
    return header + samples.astype(dtype).tobytes()


def read_pgm(path: str) -> np.ndarray:
    with open(path, 'rb') as f:
        return decode_pgm(f.read())


def write_pgm(path: str, image: np.ndarray, bit_depth: int = 16):
    atomic_write(path, encode_pgm(image, bit_depth))


# FBIT / FBIC

def encode_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    header = TENSOR_MAGIC + struct.pack('<II', VERSION, array.ndim) + struct.pack(f'<{array.ndim}Q', *array.shape)
    return header + np.ascontiguousarray(array, dtype='<f4').tobytes()


def _decode_tensor(stream: io.BytesIO) -> np.ndarray:
    head = stream.read(12)
    if len(head) < 12 or head[:4] != TENSOR_MAGIC:
        raise FormatError("not an FBIT tensor block")
    version, ndim = struct.unpack('<II', head[4:])
    if version != VERSION:
        raise FormatError(f"unsupported FBIT version {version}")
    dims_raw = stream.read(8 * ndim)
    if len(dims_raw) != 8 * ndim:
        raise FormatError("truncated FBIT dims")
    dims = struct.unpack(f'<{ndim}Q', dims_raw)
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    payload = stream.read(4 * count)
    if len(payload) != 4 * count:
        raise FormatError(f"truncated FBIT payload: {len(payload)} of {4 * count} bytes")
    return np.frombuffer(payload, dtype='<f4').reshape(dims).copy()


def decode_tensor(data: bytes) -> np.ndarray:
    stream = io.BytesIO(data)
    array = _decode_tensor(stream)
    if stream.read(1):
        raise FormatError("trailing bytes after FBIT payload")
    return array


def write_tensor(path: str, array: np.ndarray):
    atomic_write(path, encode_tensor(array))


def read_tensor(path: str) -> np.ndarray:
    with open(path, 'rb') as f:
        return decode_tensor(f.read())


def encode_checkpoint(tensors: Dict[str, np.ndarray]) -> bytes:
    parts = [CHECKPOINT_MAGIC, struct.pack('<II', VERSION, len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode('utf-8')
        parts.append(struct.pack('<I', len(encoded)) + encoded)
        parts.append(encode_tensor(array))
    return b''.join(parts)


def decode_checkpoint(data: bytes) -> Dict[str, np.ndarray]:
    stream = io.BytesIO(data)
    head = stream.read(12)
    if len(head) < 12 or head[:4] != CHECKPOINT_MAGIC:
        raise FormatError("not an FBIC checkpoint")
    version, count = struct.unpack('<II', head[4:])
    if version != VERSION:
        raise FormatError(f"unsupported FBIC version {version}")
    tensors = {}
    for _ in range(count):
        raw = stream.read(4)
        if len(raw) != 4:
            raise FormatError("truncated checkpoint record")
        (length,) = struct.unpack('<I', raw)
        name = stream.read(length)
        if len(name) != length:
            raise FormatError("truncated checkpoint record name")
        tensors[name.decode('utf-8')] = _decode_tensor(stream)
    return tensors


def save_checkpoint(path: str, tensors: Dict[str, np.ndarray]):
    atomic_write(path, encode_checkpoint(tensors))
    logger.info(f"wrote checkpoint {path} ({len(tensors)} tensors)")


def load_checkpoint(path: str) -> Dict[str, np.ndarray]:
    with open(path, 'rb') as f:
        return decode_checkpoint(f.read())


def read_image(path: str) -> np.ndarray:
    """PGM or single-image FBIT file as a float64 (H, W) array"""
    if path.lower().endswith('.pgm'):
        return read_pgm(path)
    array = read_tensor(path).astype(np.float64)
    return array.reshape(array.shape[-2:]) if array.ndim > 2 else array
