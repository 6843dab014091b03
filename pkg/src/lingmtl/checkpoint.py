"""Checkpoint container: named float32 tensors plus run metadata.

Layout: a magic line, an 8-byte big-endian header length, a sorted-key
JSON header (hyperparameters, label inventory, vocab hash, step, tensor
manifest), then raw little-endian float32 blobs in manifest order. Every
field is deterministic, so identical runs produce identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

MAGIC = b"LMTLCKPT1\n"


@dataclass
class Checkpoint:
    arrays: dict[str, np.ndarray]
    hyperparameters: dict
    inventory: dict
    vocab_sha256: str
    step: int


def model_arrays(module: torch.nn.Module) -> dict[str, np.ndarray]:
    """Parameters as float32 numpy arrays, iterated in sorted name order."""
    params = dict(module.named_parameters())
    return {
        name: params[name].detach().cpu().numpy().astype(np.float32)
        for name in sorted(params)
    }


def save_checkpoint(
    path,
    arrays: dict[str, np.ndarray],
    hyperparameters: dict,
    inventory: dict,
    vocab_sha256: str,
    step: int,
) -> None:
    names = sorted(arrays)
    manifest = []
    offset = 0
    blobs = []
    for name in names:
        # not ascontiguousarray: that would widen 0-d arrays to 1-d
        blob = np.asarray(arrays[name], dtype=np.float32)
        raw = blob.astype("<f4").tobytes()
        manifest.append(
            {"name": name, "shape": list(blob.shape), "offset": offset, "length": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    header = {
        "hyperparameters": hyperparameters,
        "inventory": inventory,
        "step": int(step),
        "tensors": manifest,
        "vocab_sha256": vocab_sha256,
    }
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(">Q", len(encoded)))
        fh.write(encoded)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    (header_len,) = struct.unpack(">Q", data[pos : pos + 8])
    pos += 8
    header = json.loads(data[pos : pos + header_len].decode("utf-8"))
    base = pos + header_len
    arrays: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start = base + entry["offset"]
        raw = data[start : start + entry["length"]]
        if len(raw) != entry["length"]:
            raise ValueError(f"{path}: truncated tensor {entry['name']!r}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(np.float32)
    return Checkpoint(
        arrays=arrays,
        hyperparameters=header["hyperparameters"],
        inventory=header["inventory"],
        vocab_sha256=header["vocab_sha256"],
        step=header["step"],
    )


def load_into_module(module: torch.nn.Module, arrays: dict[str, np.ndarray]) -> None:
    params = dict(module.named_parameters())
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise ValueError(f"parameter name mismatch: missing {missing[:3]}, extra {extra[:3]}")
    with torch.no_grad():
        for name, param in params.items():
            blob = arrays[name]
            if tuple(blob.shape) != tuple(param.shape):
                raise ValueError(
                    f"shape mismatch for {name}: checkpoint {tuple(blob.shape)}, "
                    f"model {tuple(param.shape)}"
                )
            param.copy_(torch.from_numpy(blob.copy()).to(param.dtype))
