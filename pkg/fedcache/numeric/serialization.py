"""Binary exchange format of parameter sets.

Layout, all integers little-endian:

    magic "FLPM" | format version u32
    per entry: name length u32 | name (utf-8) | rank u32 | dims u64 x rank | values f64 x prod(dims)
"""
import pathlib
import struct

import numpy as np

from fedcache.common.exceptions import DataError, DataFormatError

from .params import ParameterSet

MAGIC = b"FLPM"
FORMAT_VERSION = 1
VALUE_DTYPE = np.dtype("<f8")


def dumps(params: ParameterSet) -> bytes:
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for parameter in params:
        name = parameter.name.encode("utf-8")
        shape = parameter.value.shape
        chunks.append(struct.pack("<I", len(name)))
        chunks.append(name)
        chunks.append(struct.pack(f"<I{len(shape)}Q", len(shape), *shape))
        chunks.append(np.ascontiguousarray(parameter.value, dtype=VALUE_DTYPE).tobytes())

    return b"".join(chunks)


def loads(data: bytes, dtype: type[np.floating] = np.float64) -> ParameterSet:
    """Decode a parameter set.

    Values are stored as 64-bit floats; 32-bit sets survive the round trip bit-exactly when decoded with
    `dtype=np.float32`.
    """
    if data[:4] != MAGIC:
        raise DataFormatError("Not a parameter file: bad magic bytes")

    def read(fmt: str) -> tuple:
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(data):
            raise DataFormatError("Truncated parameter file")
        values = struct.unpack_from(fmt, data, offset)
        offset += size
        return values

    offset = 4
    (version,) = read("<I")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"Unsupported parameter format version {version}")

    params = ParameterSet()
    while offset < len(data):
        (name_length,) = read("<I")
        (name,) = read(f"<{name_length}s")
        (rank,) = read("<I")
        shape = read(f"<{rank}Q")
        count = int(np.prod(shape, dtype=np.int64))
        if offset + count * VALUE_DTYPE.itemsize > len(data):
            raise DataFormatError("Truncated parameter file")

        values = np.frombuffer(data, dtype=VALUE_DTYPE, count=count, offset=offset)
        offset += count * VALUE_DTYPE.itemsize
        params.add(name.decode("utf-8"), values.reshape(shape).astype(dtype))

    return params


def save(path: pathlib.Path, params: ParameterSet):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(params))


def load(path: pathlib.Path, dtype: type[np.floating] = np.float64) -> ParameterSet:
    try:
        data = pathlib.Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"Cannot read parameter file {path}: {exc}") from exc

    return loads(data, dtype=dtype)
