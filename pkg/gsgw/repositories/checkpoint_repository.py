"""Binary checkpoints: named float64 arrays behind a "GSGW" header.

Layout (all integers little-endian):
    b"GSGW", u32 version, u32 array count, then per array
    u32 name length, UTF-8 name, u32 ndim, ndim x u64 dims, float64 payload.
"""
import struct
from pathlib import Path
from typing import Dict

import numpy as np

from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import ParseError
from gsgw.repositories.base import BaseRepository, PathLike

logger = get_logger(__name__)

MAGIC = b"GSGW"
VERSION = 1


def encode_checkpoint(arrays: Dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, array in arrays.items():
        arr = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, count: int) -> bytes:
        if self.offset + count > len(self.data):
            raise ParseError(f"truncated checkpoint, needed {count} bytes", path=self.path, offset=self.offset)
        chunk = self.data[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes, path: str = "<checkpoint>") -> Dict[str, np.ndarray]:
    """
    Decode checkpoint bytes.

    Raises:
        ParseError: On a bad magic, an unknown version or truncation, with the byte offset
    """
    reader = _Reader(data, path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ParseError("not a checkpoint (bad magic)", path=path, offset=0)
    version, count = reader.unpack("<II")
    if version != VERSION:
        raise ParseError(f"checkpoint version {version} is not supported", path=path, offset=4)
    arrays = {}
    for _ in range(count):
        start = reader.offset
        (name_len,) = reader.unpack("<I")
        try:
            name = reader.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("array name is not UTF-8", path=path, offset=start) from exc
        (ndim,) = reader.unpack("<I")
        shape = reader.unpack(f"<{ndim}Q") if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        payload = reader.take(8 * size)
        arrays[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
    if reader.offset != len(data):
        raise ParseError("trailing bytes after the last array", path=path, offset=reader.offset)
    return arrays


class CheckpointRepository(BaseRepository):
    """Reads and writes checkpoint files."""

    def save(self, name: PathLike, arrays: Dict[str, np.ndarray]) -> Path:
        path = self.write_bytes(name, encode_checkpoint(arrays))
        logger.info(f"Saved checkpoint with {len(arrays)} arrays", extra={"path": str(path)})
        return path

    def load(self, name: PathLike) -> Dict[str, np.ndarray]:
        path = self.resolve(name)
        return decode_checkpoint(self.read_bytes(path), str(path))
