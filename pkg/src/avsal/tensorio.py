"""Binary tensor files and image export.

The ``.avt`` format is a tiny self-describing container: an 8-byte magic,
a little-endian uint32 header length, a JSON header with dtype and shape,
then the raw array bytes in C order, little-endian. Round-trips are
bitwise exact, which the checkpoint format and archive rely on.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import cv2
import numpy as np

MAGIC = b"AVSALTEN"

_SUPPORTED_DTYPES = ("float32", "float64", "uint8", "int64", "int32")


class TensorIOError(IOError):
    """Raised when a tensor file is missing, truncated or malformed."""


def save_tensor(path: str | Path, arr: np.ndarray) -> None:
    """Write an array to ``path`` in .avt format."""
    arr = np.ascontiguousarray(arr)
    dtype = arr.dtype.name
    if dtype not in _SUPPORTED_DTYPES:
        raise TensorIOError(f"unsupported dtype {dtype}")
    header = json.dumps({"dtype": dtype, "shape": list(arr.shape)}).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def load_tensor(path: str | Path) -> np.ndarray:
    """Read an array written by save_tensor."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise TensorIOError(f"cannot read tensor file {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise TensorIOError(f"{path} is not an .avt tensor file")
    (header_len,) = struct.unpack_from("<I", data, len(MAGIC))
    header_start = len(MAGIC) + 4
    header_end = header_start + header_len
    if len(data) < header_end:
        raise TensorIOError(f"{path} is truncated (header)")
    try:
        header = json.loads(data[header_start:header_end].decode("utf-8"))
        dtype = np.dtype(header["dtype"])
        shape = tuple(int(s) for s in header["shape"])
    except (ValueError, KeyError, TypeError) as exc:
        raise TensorIOError(f"{path} has a malformed header: {exc}") from exc
    nbytes = dtype.itemsize * int(np.prod(shape)) if shape else dtype.itemsize
    payload = data[header_end:]
    if len(payload) != nbytes:
        raise TensorIOError(f"{path} payload is {len(payload)} bytes, expected {nbytes}")
    arr = np.frombuffer(payload, dtype=dtype.newbyteorder("<")).astype(dtype, copy=True)
    return arr.reshape(shape)


def save_map_png(path: str | Path, values: np.ndarray) -> None:
    """Save a 2-D map as an 8-bit grayscale PNG, normalized by its max."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise TensorIOError(f"expected a 2-D map, got shape {values.shape}")
    peak = float(values.max())
    if peak > 0:
        img = np.clip(values / peak * 255.0, 0, 255).astype(np.uint8)
    else:
        img = np.zeros(values.shape, dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), img):
        raise TensorIOError(f"cannot write image {path}")
