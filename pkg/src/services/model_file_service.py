"""Binary parameter files.

Layout (little-endian): magic b"PDIF1", uint32 tensor count, then per tensor
uint16 name length, UTF-8 name, uint8 rank, rank x uint64 dims and the float64
values; a trailing uint64 holds the sum of every value's bit pattern mod 2^64.
Tensors are written in name order.
"""
import logging
import os
import struct

import numpy as np
from dotenv import dotenv_values

from src.models.errors import ModelFileError
from src.services.cloud_io_service import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"PDIF1"
CONFIG_SUFFIX = ".cfg"


def checksum(arrays):
    total = 0
    for values in arrays:
        bits = np.ascontiguousarray(values, dtype="<f8").reshape(-1).view("<u8")
        total = (total + int(bits.sum(dtype=np.uint64))) % 2 ** 64
    return total


def encode_state(state):
    names = sorted(state)
    chunks = [MAGIC, struct.pack("<I", len(names))]
    for name in names:
        values = np.ascontiguousarray(state[name], dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack("<B", values.ndim) + struct.pack(f"<{values.ndim}Q", *values.shape))
        chunks.append(values.tobytes())
    chunks.append(struct.pack("<Q", checksum(state[name] for name in names)))
    return b"".join(chunks)


def decode_state(data, path=None):
    where = f" in {path}" if path else ""
    if data[:len(MAGIC)] != MAGIC:
        raise ModelFileError(f"Bad magic{where}: expected {MAGIC!r}")
    offset = len(MAGIC)

    def take(size):
        nonlocal offset
        if offset + size > len(data):
            raise ModelFileError(f"Model file truncated at byte {offset}{where}")
        chunk = data[offset:offset + size]
        offset += size
        return chunk

    (count,) = struct.unpack("<I", take(4))
    state = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        size = int(np.prod(shape)) if rank else 1
        state[name] = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
    (stored,) = struct.unpack("<Q", take(8))
    if offset != len(data):
        raise ModelFileError(f"{len(data) - offset} trailing bytes after checksum{where}")
    if checksum(state[name] for name in sorted(state)) != stored:
        raise ModelFileError(f"Checksum mismatch{where}")
    return state


def save_model(store, path, config=None):
    """Write the store's parameters; with a config, also write a key = value sidecar at path + '.cfg'."""
    atomic_write(path, encode_state(store.state()))
    if config is not None:
        lines = [f"{key} = {_format_value(value)}" for key, value in config.to_dict().items()]
        atomic_write(config_sidecar_path(path), "\n".join(lines) + "\n")
    logger.info(f"Saved {len(store)} parameters to {path}")
    return path


def load_state(path):
    if not os.path.exists(path):
        raise ModelFileError(f"Model file not found: {path}")
    with open(path, "rb") as f:
        return decode_state(f.read(), path)


def load_model(store, path):
    """Overwrite store with the parameters saved at path; names and shapes must match."""
    state = load_state(path)
    try:
        store.load_state(state)
    except Exception as e:
        raise ModelFileError(f"{path} does not match the model configuration: {e}") from None
    return store


def config_sidecar_path(path):
    return f"{path}{CONFIG_SUFFIX}"


def read_sidecar(path):
    sidecar = config_sidecar_path(path)
    return dict(dotenv_values(sidecar)) if os.path.exists(sidecar) else None


def _format_value(value):
    if isinstance(value, (list, tuple)):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)
