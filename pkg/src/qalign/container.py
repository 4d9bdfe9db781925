"""Binary tensor container used for FP and quantized model files.

Layout (little-endian)::

    b"QALN"  u16 version  u32 record_count
    per record:
        u16 name_len  name (utf-8)
        u8 dtype_tag (0 = f32, 1 = i8)  u8 ndim  u32 dim * ndim
        u32 scale_count  f32 scale * scale_count
        payload (f32 or i8, row-major)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .fileio import atomic_write_bytes

MAGIC = b"QALN"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("i1")}
_TAGS = {np.dtype("float32"): 0, np.dtype("int8"): 1}


@dataclass(eq=False)
class TensorRecord:
    name: str
    data: np.ndarray
    scales: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.float32))

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data)
        if self.data.dtype not in _TAGS:
            raise TypeError(f"record {self.name!r}: unsupported dtype {self.data.dtype}")
        self.scales = np.ascontiguousarray(self.scales, dtype=np.float32).reshape(-1)


def dumps(records: list[TensorRecord]) -> bytes:
    out = [MAGIC, struct.pack("<HI", VERSION, len(records))]
    for rec in records:
        name = rec.name.encode("utf-8")
        out.append(struct.pack("<H", len(name)))
        out.append(name)
        out.append(struct.pack("<BB", _TAGS[rec.data.dtype], rec.data.ndim))
        out.append(struct.pack(f"<{rec.data.ndim}I", *rec.data.shape))
        out.append(struct.pack("<I", rec.scales.size))
        out.append(rec.scales.astype("<f4").tobytes())
        out.append(rec.data.astype(_DTYPES[_TAGS[rec.data.dtype]]).tobytes())
    return b"".join(out)


def loads(buf: bytes) -> list[TensorRecord]:
    view = memoryview(buf)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise FormatError("truncated container")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise FormatError("bad magic, not a QALN container")
    version, count = struct.unpack("<HI", take(6))
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    records = []
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        tag, ndim = struct.unpack("<BB", take(2))
        if tag not in _DTYPES:
            raise FormatError(f"record {name!r}: unknown dtype tag {tag}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        (nscales,) = struct.unpack("<I", take(4))
        scales = np.frombuffer(take(4 * nscales), dtype="<f4").astype(np.float32)
        dtype = _DTYPES[tag]
        n = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(take(n * dtype.itemsize), dtype=dtype).reshape(shape)
        records.append(TensorRecord(name, data.astype(dtype.newbyteorder("=")), scales))
    if pos != len(view):
        raise FormatError(f"{len(view) - pos} trailing bytes after last record")
    return records


def save(path, records: list[TensorRecord]) -> int:
    data = dumps(records)
    atomic_write_bytes(path, data)
    return len(data)


def load(path) -> list[TensorRecord]:
    return loads(Path(path).read_bytes())
