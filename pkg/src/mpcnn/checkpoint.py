"""Binary checkpoint format for trained models.

Layout: magic "GMPW", u32 version, then named tensors back to back:
[u16 name length][name bytes][u8 rank][u32 extents...][float32 payload].
A JSON sidecar ('<path>.json') carries the layer plan and, optionally,
the training hyperparameters.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .model import ModelSpec, MultipathCNN, build_model
from .nn.layers import Conv2d, Dense

MAGIC = b"GMPW"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class CheckpointPayloadError(CheckpointError):
    pass


def _named_params(model: MultipathCNN):
    for i, layer in enumerate(model.network.layers):
        if isinstance(layer, (Conv2d, Dense)):
            kind = "conv" if isinstance(layer, Conv2d) else "dense"
            yield f"{kind}{i}.w", layer, "w"
            yield f"{kind}{i}.b", layer, "b"


def save_checkpoint(model: MultipathCNN, path, hyper: dict | None = None) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        for name, layer, attr in _named_params(model):
            tensor = np.ascontiguousarray(getattr(layer, attr), dtype="<f4")
            encoded = name.encode()
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", tensor.ndim))
            f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            f.write(tensor.tobytes())
    sidecar = {"spec": model.spec.to_dict(), "format_version": FORMAT_VERSION}
    if hyper:
        sidecar["hyper"] = hyper
    with open(str(path) + ".json", "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)


def _read_tensors(raw: bytes):
    if raw[:4] != MAGIC:
        raise CheckpointError(f"bad magic {raw[:4]!r}")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    pos, end = 8, len(raw)
    while pos < end:
        try:
            (name_len,) = struct.unpack("<H", raw[pos : pos + 2])
            pos += 2
            name = raw[pos : pos + name_len].decode()
            pos += name_len
            rank = raw[pos]
            pos += 1
            shape = struct.unpack(f"<{rank}I", raw[pos : pos + 4 * rank])
            pos += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            data = np.frombuffer(raw, dtype="<f4", count=count, offset=pos)
            pos += 4 * count
        except (struct.error, ValueError) as exc:
            raise CheckpointPayloadError(f"truncated tensor record: {exc}") from exc
        if data.size != count:
            raise CheckpointPayloadError("payload ends mid-tensor")
        yield name, data.reshape(shape)


def load_checkpoint(path) -> MultipathCNN:
    """Rebuild the model from sidecar plan and stored parameters."""
    try:
        with open(str(path) + ".json") as f:
            sidecar = json.load(f)
    except OSError as exc:
        raise CheckpointError(f"missing checkpoint sidecar: {exc}") from exc
    spec = ModelSpec.from_dict(sidecar["spec"])
    model = build_model(
        spec.n,
        seed=0,
        channels=spec.channels,
        classifier_width=spec.classifier_width,
        dtype=np.float32,
    )
    with open(path, "rb") as f:
        raw = f.read()
    expected = {name: (layer, attr) for name, layer, attr in _named_params(model)}
    seen = set()
    for name, tensor in _read_tensors(raw):
        if name not in expected:
            raise CheckpointShapeError(f"unexpected tensor {name!r} for this plan")
        layer, attr = expected[name]
        current = getattr(layer, attr)
        if tuple(tensor.shape) != tuple(current.shape):
            raise CheckpointShapeError(
                f"{name}: stored shape {tensor.shape} != plan shape {current.shape}"
            )
        setattr(layer, attr, tensor.copy())
        seen.add(name)
    missing = set(expected) - seen
    if missing:
        raise CheckpointPayloadError(f"missing tensors: {sorted(missing)}")
    return model
