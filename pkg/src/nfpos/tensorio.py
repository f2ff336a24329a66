"""Binary tensor container and key-value manifests.

Container layout (all little-endian)::

    b"NFPD" | u32 version | u32 rank | u64 dims[rank] | payload

The payload is C-ordered float32, or uint64 for integer tensors such as
seeds. The element type is not stored in the header; it follows from the
payload length, or from the ``dtype`` recorded alongside the file in a
manifest. Integrity is checked through a CRC-32 of the payload, also kept in
the manifest.

Manifests are INI files read and written with :mod:`configparser`.
"""
from __future__ import annotations

import configparser
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptionError, FormatError

MAGIC = b"NFPD"
VERSION = 1
DTYPES = {"float32": np.dtype("<f4"), "uint64": np.dtype("<u8")}


def _dtype_name(arr):
    if arr.dtype.kind == "f":
        return "float32"
    if arr.dtype.kind in "ui":
        return "uint64"
    raise TypeError(f"unsupported dtype {arr.dtype}")


def encode_tensor(arr):
    """Serialize ``arr``; floats are stored as float32, integers as uint64."""
    arr = np.asarray(arr)
    name = _dtype_name(arr)
    payload = np.ascontiguousarray(arr, dtype=DTYPES[name]).tobytes()
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + payload, name, zlib.crc32(payload)


def write_tensor(path, arr):
    """Write ``arr`` to ``path``; returns ``(dtype_name, crc32)`` for the manifest."""
    data, name, crc = encode_tensor(arr)
    path = Path(path)
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write tensor file {path}: {exc}") from exc
    return name, crc


def decode_tensor(data, dtype=None, checksum=None, source="<bytes>"):
    if len(data) < 12:
        raise CorruptionError(f"{source}: file too short for a header ({len(data)} bytes)")
    magic = data[:4]
    if magic != MAGIC:
        if magic == MAGIC[::-1]:
            raise FormatError(f"{source}: big-endian container is not supported")
        raise FormatError(f"{source}: bad magic {magic!r}")
    version, rank = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"{source}: unsupported format version {version}")
    offset = 12 + 8 * rank
    if len(data) < offset:
        raise CorruptionError(f"{source}: truncated header")
    shape = struct.unpack_from(f"<{rank}Q", data, 12)
    payload = data[offset:]
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    if dtype is None:
        matches = [n for n, dt in DTYPES.items() if count * dt.itemsize == len(payload)]
        if count == 0 and not payload:
            matches = ["float32"]
        if len(matches) != 1:
            raise CorruptionError(
                f"{source}: payload of {len(payload)} bytes does not fit shape {shape}"
            )
        dtype = matches[0]
    dt = DTYPES[dtype]
    if len(payload) != count * dt.itemsize:
        raise CorruptionError(
            f"{source}: expected {count * dt.itemsize} payload bytes for {dtype}{list(shape)}, "
            f"found {len(payload)}"
        )
    if checksum is not None and zlib.crc32(payload) != int(checksum):
        raise CorruptionError(f"{source}: CRC-32 mismatch")
    return np.frombuffer(payload, dtype=dt).reshape(shape).copy()


def read_tensor(path, dtype=None, checksum=None):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read tensor file {path}: {exc}") from exc
    return decode_tensor(data, dtype=dtype, checksum=checksum, source=str(path))


def write_manifest(path, sections):
    """Write ``{section: {key: value}}`` as INI text; values are stringified."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for name, items in sections.items():
        parser[name] = {k: _to_text(v) for k, v in items.items()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        parser.write(fh)


def read_manifest(path):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    parser.read(path, encoding="utf-8")
    return {s: dict(parser[s]) for s in parser.sections()}


def _to_text(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_to_text(v) for v in value)
    return str(value)


def parse_floats(text):
    return tuple(float(x) for x in text.split(",")) if text.strip() else ()


def parse_ints(text):
    return tuple(int(x) for x in text.split(",")) if text.strip() else ()
