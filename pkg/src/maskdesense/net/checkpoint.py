"""Model checkpoint format.

Layout: magic ``MDS1``, little-endian u32 format version, u32 byte length of
the JSON architecture descriptor, the descriptor itself, then every state
array (parameters and batch-norm running statistics, in the model's
canonical order) as IEEE-754 32-bit little-endian values. Loading a saved
model reproduces its parameters bit for bit.
"""

import json
import struct

import numpy as np

from ..errors import CheckpointError
from .model import Model

MAGIC = b"MDS1"
VERSION = 1


def save_checkpoint(model):
    desc = json.dumps(model.descriptor, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(desc)), desc]
    for arr in model.state().values():
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def load_checkpoint(blob):
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointError("bad checkpoint magic")
    version, desc_len = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if len(blob) < 12 + desc_len:
        raise CheckpointError("checkpoint truncated inside descriptor")
    try:
        descriptor = json.loads(blob[12 : 12 + desc_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable descriptor: {exc}") from exc
    model = Model(descriptor, seed=0)
    state = model.state()
    expected = sum(arr.size for arr in state.values()) * 4
    payload = blob[12 + desc_len :]
    if len(payload) != expected:
        raise CheckpointError(
            f"payload holds {len(payload)} bytes, descriptor implies {expected}")
    offset = 0
    loaded = {}
    for name, arr in state.items():
        nbytes = arr.size * 4
        values = np.frombuffer(payload, dtype="<f4", count=arr.size,
                               offset=offset).reshape(arr.shape)
        if not np.isfinite(values).all():
            raise CheckpointError(f"non-finite values in {name}")
        loaded[name] = values
        offset += nbytes
    model.load_state(loaded)
    return model


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(save_checkpoint(model))


def load_model(path):
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read())
