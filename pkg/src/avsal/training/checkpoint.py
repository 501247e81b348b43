"""Versioned checkpoint files.

A checkpoint is a flat map of parameter name -> tensor, stored as one
binary file: magic, little-endian uint32 header length, a JSON header
(format id, model version string, configs, tensor directory with dtypes,
shapes and offsets), then the concatenated raw tensor bytes. Round-trips
are bitwise exact.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import torch

from .config import ConfigError

MAGIC = b"AVSALCKP"
FORMAT = "avsal-ckpt/1"


class CheckpointError(ConfigError):
    """Raised for unreadable, malformed or incompatible checkpoints."""


@dataclass
class Checkpoint:
    model_version: str
    stage: str
    config: dict
    tensors: dict[str, np.ndarray]


def save_checkpoint(path: str | Path, tensors: dict[str, torch.Tensor | np.ndarray],
                    model_version: str, stage: str, config: Optional[dict] = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, tensor in tensors.items():
        arr = tensor.detach().cpu().numpy() if isinstance(tensor, torch.Tensor) else np.asarray(tensor)
        arr = np.ascontiguousarray(arr)
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C")
        entries.append({
            "name": name,
            "dtype": arr.dtype.name,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)

    header = json.dumps({
        "format": FORMAT,
        "model_version": model_version,
        "stage": stage,
        "config": config or {},
        "tensors": entries,
    }).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    (header_len,) = struct.unpack_from("<I", data, len(MAGIC))
    start = len(MAGIC) + 4
    try:
        header = json.loads(data[start:start + header_len].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"{path} has a malformed header: {exc}") from exc
    if header.get("format") != FORMAT:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format {header.get('format')!r}")

    body = start + header_len
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        shape = tuple(entry["shape"])
        lo = body + entry["offset"]
        hi = lo + entry["nbytes"]
        if hi > len(data):
            raise CheckpointError(f"{path} is truncated at tensor {entry['name']!r}")
        arr = np.frombuffer(data[lo:hi], dtype=dtype).astype(dtype.newbyteorder("="), copy=True)
        tensors[entry["name"]] = arr.reshape(shape)
    return Checkpoint(
        model_version=header["model_version"],
        stage=header.get("stage", ""),
        config=header.get("config", {}),
        tensors=tensors,
    )


def check_version(ckpt: Checkpoint, model_version: str, path: str | Path = "") -> None:
    if ckpt.model_version != model_version:
        where = f" ({path})" if path else ""
        raise CheckpointError(
            f"checkpoint version {ckpt.model_version!r}{where} is incompatible "
            f"with model version {model_version!r}")


def load_into(module: torch.nn.Module, ckpt: Checkpoint,
              include: Optional[Iterable[str]] = None) -> list[str]:
    """Copy checkpoint tensors into matching module parameters/buffers.

    ``include`` restricts loading to names starting with any given prefix.
    Returns the loaded names; raises CheckpointError on a shape mismatch
    or when nothing matches the include filter.
    """
    prefixes = tuple(include) if include is not None else None
    state = module.state_dict()
    loaded = []
    with torch.no_grad():
        for name, arr in ckpt.tensors.items():
            if prefixes is not None and not name.startswith(prefixes):
                continue
            if name not in state:
                continue
            target = state[name]
            if tuple(target.shape) != arr.shape:
                raise CheckpointError(
                    f"tensor {name!r}: checkpoint shape {arr.shape} does not match "
                    f"model shape {tuple(target.shape)}")
            target.copy_(torch.from_numpy(arr.copy()))
            loaded.append(name)
    if prefixes is not None and not loaded:
        raise CheckpointError(f"checkpoint has no tensors matching prefixes {list(prefixes)}")
    return loaded
