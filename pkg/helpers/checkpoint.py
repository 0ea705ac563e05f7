"""
Single-file model checkpoints.

Layout: b"ZVCK", uint32 format version, uint64 manifest length, the
manifest as sorted-key UTF-8 JSON, then every parameter's raw little-endian
bytes back to back. The manifest echoes the model kind and config and lists
each parameter's name, shape, dtype and byte offset into the data section.
Loading rebuilds the model from the config and assigns the stored arrays,
so a save/load round trip is bit-exact.
"""

import json
import logging
import os
import struct
from pathlib import Path
from typing import Any

import numpy as np

from helpers.errors import ConfigurationError, InputError
from helpers.logging import MAIN_LOGGER_NAME
from helpers.model import VisionModel, build_model, config_from_dict

logger = logging.getLogger(MAIN_LOGGER_NAME)

MAGIC = b"ZVCK"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def checkpoint_bytes(model: VisionModel, extra: dict[str, Any] | None = None) -> bytes:
    entries = []
    blobs = []
    offset = 0
    for param in model.params:
        arr = param.value.data
        dtype = arr.dtype.newbyteorder("<")
        raw = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        entries.append(
            {
                "name": param.name,
                "shape": list(arr.shape),
                "dtype": dtype.str,
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "kind": model.kind,
        "config": model.config.to_dict(),
        "dtype": model.dtype,
        "seed": model.seed,
        "params": entries,
        "extra": extra or {},
    }
    encoded = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(encoded)) + encoded + b"".join(blobs)


def save_checkpoint(
    model: VisionModel, path: Path | str, extra: dict[str, Any] | None = None
) -> Path:
    """Write atomically: a temporary sibling file is renamed into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(checkpoint_bytes(model, extra))
    os.replace(tmp, path)
    logger.debug(f"Saved checkpoint {path}")
    return path


def read_manifest(path: Path | str) -> tuple[dict[str, Any], bytes]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Checkpoint not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise InputError(f"{path} is too short to be a checkpoint")
    magic, version, length = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise InputError(f"{path} is not a checkpoint (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ConfigurationError(
            f"{path} uses checkpoint format {version}; this build reads format {FORMAT_VERSION}"
        )
    start = _HEADER.size
    try:
        manifest = json.loads(blob[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path} has a corrupt manifest: {exc}") from exc
    return manifest, blob[start + length :]


def load_checkpoint(path: Path | str) -> tuple[VisionModel, dict[str, Any]]:
    """Rebuild the model a checkpoint was saved from; returns (model, manifest)."""
    manifest, data = read_manifest(path)
    config = config_from_dict(manifest["kind"], manifest["config"])
    model = build_model(
        manifest["kind"], config, seed=manifest.get("seed", 0), dtype=manifest["dtype"]
    )
    stored = {entry["name"]: entry for entry in manifest["params"]}
    if set(stored) != set(model.params.names()):
        missing = sorted(set(model.params.names()) - set(stored))
        unexpected = sorted(set(stored) - set(model.params.names()))
        raise ConfigurationError(
            f"{path} does not match its {manifest['kind']} config: "
            f"missing {missing or 'none'}, unexpected {unexpected or 'none'}"
        )
    for param in model.params:
        entry = stored[param.name]
        end = entry["offset"] + entry["nbytes"]
        if end > len(data):
            raise InputError(f"{path} is truncated inside parameter {param.name}")
        dtype = np.dtype(entry["dtype"])
        arr = np.frombuffer(
            data,
            dtype=dtype,
            count=entry["nbytes"] // dtype.itemsize,
            offset=entry["offset"],
        ).reshape(entry["shape"])
        param.assign(arr.astype(param.value.dtype, copy=False))
    logger.info(f"Loaded {manifest['kind']} checkpoint {path}")
    return model, manifest
