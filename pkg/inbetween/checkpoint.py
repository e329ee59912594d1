"""
Checkpoint persistence.

Binary layout (all integers u32 little-endian):

    b"VIGC" | version | config length | config JSON (UTF-8)
    | tensor count | per tensor: name length, name, ndim, dims..., float32 LE data

The config block is ``{"config": <TrainConfig>, "iteration": k}``. Model
tensors keep their parameter names; optimizer accumulators are stored as
``<state name>/<parameter name>``.
"""

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import numpy as np
from pydantic import ValidationError

from .config import TrainConfig
from .logging_config import get_logger
from .model import ModelParams, parameter_shapes


MAGIC = b"VIGC"
VERSION = 1

logger = get_logger("checkpoint")


class CheckpointError(ValueError):
    """Raised when a checkpoint file cannot be written or parsed."""


@dataclass
class Checkpoint:
    config: TrainConfig
    iteration: int
    params: ModelParams
    optimizer_states: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)


def _u32(value: int) -> bytes:
    return struct.pack("<I", value)


def _encode_tensor(name: str, data: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    array = np.ascontiguousarray(data, dtype="<f4")
    parts = [_u32(len(encoded)), encoded, _u32(array.ndim)]
    parts.extend(_u32(dim) for dim in array.shape)
    parts.append(array.tobytes())
    return b"".join(parts)


def save_checkpoint(path: Union[str, Path], params: ModelParams,
                    optimizer_states: Mapping[str, Mapping[str, np.ndarray]],
                    config: TrainConfig, iteration: int) -> None:
    """
    Write a checkpoint atomically (temporary file, then rename).

    Args:
        path: Destination file
        params: All model parameters (generator and critic)
        optimizer_states: State name (``opt_gen``, ``opt_critic``) to accumulators
        config: Training configuration stored in the header
        iteration: Number of completed training iterations
    """
    path = Path(path)
    tensors = [(name, tensor.data) for name, tensor in params.items()]
    for state_name, accumulators in optimizer_states.items():
        tensors.extend((f"{state_name}/{name}", value) for name, value in accumulators.items())

    header = json.dumps({"config": config.model_dump(), "iteration": int(iteration)},
                        sort_keys=True).encode("utf-8")
    payload = b"".join([MAGIC, _u32(VERSION), _u32(len(header)), header, _u32(len(tensors))]
                       + [_encode_tensor(name, data) for name, data in tensors])

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        with open(tmp_path, "wb") as f:
            f.write(payload)
        os.replace(tmp_path, path)
    except OSError as e:
        raise CheckpointError(f"{path}: cannot write checkpoint: {e}")
    logger.info(f"Saved checkpoint {path} at iteration {iteration} ({len(tensors)} tensors)")


class _Reader:
    def __init__(self, path: Path, blob: bytes):
        self.path = path
        self.blob = blob
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        end = self.offset + count
        if end > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated while reading {what}")
        chunk = self.blob[self.offset:end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def _read_tensor(reader: _Reader, index: int) -> Tuple[str, np.ndarray]:
    name_length = reader.u32(f"name length of tensor {index}")
    try:
        name = reader.take(name_length, f"name of tensor {index}").decode("utf-8")
    except UnicodeDecodeError:
        raise CheckpointError(f"{reader.path}: tensor {index} name is not valid UTF-8")
    ndim = reader.u32(f"rank of tensor {name}")
    dims = tuple(reader.u32(f"dims of tensor {name}") for _ in range(ndim))
    count = int(np.prod(dims, dtype=np.int64))
    raw = reader.take(4 * count, f"data of tensor {name}")
    return name, np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        CheckpointError: Missing file, wrong magic or version, malformed
            config block, truncation, trailing bytes, or tensors that do not
            match the stored configuration
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"{path}: cannot read checkpoint: {e}")

    reader = _Reader(path, blob)
    magic = reader.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    version = reader.u32("version")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}, expected {VERSION}")

    header_length = reader.u32("config length")
    try:
        header = json.loads(reader.take(header_length, "config block").decode("utf-8"))
        config = TrainConfig.model_validate(header["config"])
        iteration = int(header["iteration"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
        raise CheckpointError(f"{path}: malformed config block: {e}")

    tensors: Dict[str, np.ndarray] = {}
    for index in range(reader.u32("tensor count")):
        name, data = _read_tensor(reader, index)
        if name in tensors:
            raise CheckpointError(f"{path}: duplicate tensor {name}")
        tensors[name] = data
    if reader.offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - reader.offset} trailing bytes after last tensor")

    arrays = {}
    for name, shape in parameter_shapes(config).items():
        if name not in tensors:
            raise CheckpointError(f"{path}: missing parameter {name}")
        if tensors[name].shape != shape:
            raise CheckpointError(f"{path}: parameter {name} has shape {tensors[name].shape}, expected {shape}")
        arrays[name] = tensors.pop(name)

    optimizer_states: Dict[str, Dict[str, np.ndarray]] = {}
    for name, data in tensors.items():
        if "/" not in name:
            raise CheckpointError(f"{path}: unexpected tensor {name}")
        state_name, param_name = name.split("/", 1)
        optimizer_states.setdefault(state_name, {})[param_name] = data

    logger.info(f"Loaded checkpoint {path} at iteration {iteration}")
    return Checkpoint(config, iteration, ModelParams.from_arrays(arrays, config), optimizer_states)
