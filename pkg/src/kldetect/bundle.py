"""Versioned, length-prefixed binary container for trained models.

Layout::

    b"KLDB" | u16 version | u64 header length | header JSON (utf-8) | array payload

The header holds the learner description, its fitted state (with every numpy
array replaced by a ``{"__array__": i}`` reference) and free-form metadata.
Arrays are stored raw, little-endian, in reference order, so float64 values
round-trip bit-exactly and the byte stream is deterministic.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .learners.base import learner_from_dict, learner_to_dict

MAGIC = b"KLDB"
VERSION = 1


def _pack(obj, arrays):
    if isinstance(obj, np.ndarray):
        arrays.append(np.ascontiguousarray(obj))
        return {"__array__": len(arrays) - 1}
    if isinstance(obj, dict):
        return {str(k): _pack(v, arrays) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pack(v, arrays) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _unpack(obj, arrays):
    if isinstance(obj, dict):
        if set(obj) == {"__array__"}:
            return arrays[obj["__array__"]]
        return {k: _unpack(v, arrays) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unpack(v, arrays) for v in obj]
    return obj


def dumps(model, meta=None):
    # imported for its side effect of registering ensemble classes
    from . import ensemble  # noqa: F401

    arrays = []
    body = {"model": _pack(learner_to_dict(model), arrays), "meta": _pack(meta or {}, arrays)}
    specs, offset = [], 0
    for a in arrays:
        le = a.astype(a.dtype.newbyteorder("<"), copy=False)
        specs.append({"dtype": le.dtype.str, "shape": list(a.shape), "offset": offset, "nbytes": le.nbytes})
        offset += le.nbytes
    body["arrays"] = specs
    header = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<HQ", VERSION, len(header)), header]
    parts += [a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes() for a in arrays]
    return b"".join(parts)


def loads(blob):
    from . import ensemble  # noqa: F401

    if blob[:4] != MAGIC:
        raise ValueError("not a model bundle")
    version, hlen = struct.unpack_from("<HQ", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported bundle version {version}")
    start = 4 + struct.calcsize("<HQ")
    body = json.loads(blob[start:start + hlen].decode("utf-8"))
    payload = memoryview(blob)[start + hlen:]
    arrays = []
    for s in body["arrays"]:
        raw = payload[s["offset"]:s["offset"] + s["nbytes"]]
        arrays.append(np.frombuffer(raw, dtype=np.dtype(s["dtype"])).reshape(s["shape"]).copy())
    model = learner_from_dict(_unpack(body["model"], arrays))
    return model, _unpack(body["meta"], arrays)


def save(model, path, meta=None):
    Path(path).write_bytes(dumps(model, meta))


def load(path):
    return loads(Path(path).read_bytes())
