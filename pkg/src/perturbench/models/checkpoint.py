"""Versioned binary model checkpoints.

Layout: magic bytes, a length-prefixed JSON header (model kind, config,
array manifest), then each array's raw little-endian float32 data in
manifest order. save(load(path)) reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .networks import MODEL_KINDS, Classifier

MAGIC = b"PTBNCH01"


def save_checkpoint(model: Classifier, path) -> None:
    items = model.param_items()
    header = {
        "kind": model.kind,
        "config": model.config.to_dict(),
        "arrays": [{"name": n, "shape": list(t.data.shape)} for n, t in items],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(str(path), "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, t in items:
            f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_checkpoint(path) -> Classifier:
    with open(str(path), "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        kind = header["kind"]
        if kind not in MODEL_KINDS:
            raise ValueError(f"checkpoint for unknown model kind {kind!r}")
        cls, cfg_cls = MODEL_KINDS[kind]
        model = cls(cfg_cls.from_dict(header["config"]))
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 4)
            if len(raw) != count * 4:
                raise ValueError("truncated checkpoint")
            arrays[spec["name"]] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
        model.set_param_arrays(arrays)
    return model
