"""
Checkpoint format - a directory holding `manifest.json` (name, shape and byte
offset per parameter, plus the model config) and `weights.bin`, one blob of
little-endian float64 values in row-major order.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .errors import CheckpointError

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
BLOB = "weights.bin"
FORMAT = "dxpath-checkpoint/1"
_DTYPE = np.dtype("<f8")


def write_arrays(directory, arrays: Dict[str, np.ndarray], config: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write named arrays in the given order.

    Returns:
        The checkpoint directory
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    entries = []
    offset = 0
    chunks = []
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype=_DTYPE)
        entries.append({"name": name, "shape": list(data.shape), "offset": offset})
        chunk = data.tobytes(order="C")
        chunks.append(chunk)
        offset += len(chunk)

    manifest = {"format": FORMAT, "config": config or {}, "parameters": entries, "total_bytes": offset}
    with open(directory / BLOB, "wb") as f:
        for chunk in chunks:
            f.write(chunk)
    with open(directory / MANIFEST, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug(f"Wrote {len(entries)} array(s), {offset} bytes to {directory}")
    return directory


def read_arrays(directory) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read every array of a checkpoint directory.

    Returns:
        Tuple of (name to array in manifest order, stored config)

    Raises:
        CheckpointError: Missing files, malformed manifest or a blob whose
            size disagrees with the manifest
    """
    directory = Path(directory)
    manifest_path, blob_path = directory / MANIFEST, directory / BLOB
    if not manifest_path.exists() or not blob_path.exists():
        raise CheckpointError(f"Not a checkpoint directory: {directory}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        entries = manifest["parameters"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise CheckpointError(f"Malformed checkpoint manifest {manifest_path}: {e}")
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"Unsupported checkpoint format: {manifest.get('format')}")

    blob = blob_path.read_bytes()
    arrays: Dict[str, np.ndarray] = {}
    expected = 0
    for entry in entries:
        name, shape, offset = entry["name"], tuple(entry["shape"]), int(entry["offset"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * _DTYPE.itemsize
        if end > len(blob):
            raise CheckpointError(
                f"Checkpoint blob truncated: parameter '{name}' needs bytes {offset}..{end}, blob has {len(blob)}",
                {"parameter": name},
            )
        arrays[name] = np.frombuffer(blob, dtype=_DTYPE, count=count, offset=offset).reshape(shape).astype(np.float64)
        expected = max(expected, end)
    if len(blob) != expected:
        raise CheckpointError(f"Checkpoint blob has {len(blob)} bytes, manifest describes {expected}")
    return arrays, manifest.get("config", {})


def save_checkpoint(model, directory, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write every parameter of `model` plus its architecture description."""
    config = {"model": model.describe()}
    if extra:
        config.update(extra)
    return write_arrays(directory, model.state_dict(), config)


def load_state(model, arrays: Dict[str, np.ndarray]) -> None:
    """
    Copy arrays into the model's parameters.

    Raises:
        CheckpointError: Unknown or missing parameter, or a shape mismatch
    """
    params = dict(model.named_parameters())
    unknown = [name for name in arrays if name not in params]
    if unknown:
        raise CheckpointError(f"Checkpoint lists unknown parameter '{unknown[0]}'", {"parameter": unknown[0]})
    missing = [name for name in params if name not in arrays]
    if missing:
        raise CheckpointError(f"Checkpoint is missing parameter '{missing[0]}'", {"parameter": missing[0]})
    for name, param in params.items():
        if arrays[name].shape != param.shape:
            raise CheckpointError(
                f"Shape mismatch for parameter '{name}': checkpoint {arrays[name].shape}, model {param.shape}",
                {"parameter": name},
            )
    for name, param in params.items():
        param.data[...] = arrays[name]


def load_checkpoint(directory, model=None):
    """
    Load a checkpoint into `model`, or build the model it describes.

    Returns:
        PathRankerModel
    """
    from .model import PathRankerModel
    from .ranker import RankerConfig

    arrays, config = read_arrays(directory)
    if model is None:
        arch = config.get("model")
        if not arch:
            raise CheckpointError(f"Checkpoint {directory} does not describe a model")
        try:
            model = PathRankerModel(
                dim=arch["dim"],
                relation_vocab=arch["relation_vocab"],
                config=RankerConfig(
                    variant=arch["variant"],
                    reduced_dim=arch["reduced_dim"],
                    heads=arch["heads"],
                    trilinear_rank=arch["trilinear_rank"],
                ),
                gin_layers=arch["gin_layers"],
            )
        except KeyError as e:
            raise CheckpointError(f"Checkpoint model description lacks {e}")
    load_state(model, arrays)
    logger.info(f"Loaded checkpoint {directory} ({len(arrays)} parameters)")
    return model
