"""Versioned, self-describing binary checkpoint container.

Layout::

    8 bytes   magic  b"FLRECKPT"
    u32 LE    format version
    u64 LE    header length in bytes
    header    UTF-8 JSON: dimensions, vocab sizes, schema names, tensor index
    body      float64 little-endian tensors, back to back
    32 bytes  sha256 of the body
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..features import FeatureSchema
from .params import ModelConfig, ModelParams, tensor_shapes
from .training import OptimizerState

MAGIC = b"FLRECKPT"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sIQ")


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    params: ModelParams
    optimizer_state: OptimizerState | None = None
    meta: dict = field(default_factory=dict)


def _tensor_items(ckpt: Checkpoint):
    p = ckpt.params
    yield "schema.mean", p.schema.mean
    yield "schema.std", p.schema.std
    yield "output.scale", p.output_scale
    yield from p.tensors.items()
    if ckpt.optimizer_state is not None:
        for k, v in ckpt.optimizer_state.slots.items():
            yield f"opt.{k}", v


def save_checkpoint(params: ModelParams | Checkpoint, path, *, optimizer_state=None, meta=None) -> None:
    ckpt = params if isinstance(params, Checkpoint) else Checkpoint(params, optimizer_state, meta or {})
    p = ckpt.params
    if not p.schema.fitted:
        raise CheckpointError("cannot save a model whose feature schema is not fitted")
    index, chunks, offset = [], [], 0
    for name, arr in _tensor_items(ckpt):
        buf = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        index.append({"name": name, "shape": list(np.shape(arr)), "offset": offset, "nbytes": len(buf)})
        chunks.append(buf)
        offset += len(buf)
    body = b"".join(chunks)
    cfg = p.config
    header = {
        "format_version": FORMAT_VERSION,
        "d1": p.schema.d1,
        "d2": p.schema.d2,
        "hidden": cfg.hidden,
        "emb_dim": cfg.emb_dim,
        "deep_hidden": list(cfg.deep_hidden),
        "n_vehicles": cfg.n_vehicles,
        "n_links": cfg.n_links,
        "output_activation": cfg.output_activation,
        "schema": {"link_names": list(p.schema.link_names), "vehicle_names": list(p.schema.vehicle_names)},
        "optimizer_step": ckpt.optimizer_state.step if ckpt.optimizer_state is not None else None,
        "meta": ckpt.meta,
        "tensors": index,
        "body_bytes": len(body),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    data = _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(hbytes)) + hbytes + body + hashlib.sha256(body).digest()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def read_checkpoint(path, *, expected_d1: int | None = None, expected_d2: int | None = None) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < _PREAMBLE.size:
        raise CheckpointTruncatedError(f"{path}: file shorter than the preamble")
    magic, version, hlen = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointCorruptError(f"{path}: not a checkpoint (bad magic)")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    start = _PREAMBLE.size
    if len(data) < start + hlen:
        raise CheckpointTruncatedError(f"{path}: header truncated")
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"{path}: unreadable header") from exc
    if header.get("format_version") != version:
        raise CheckpointVersionError(f"{path}: header version disagrees with preamble")
    body_start = start + hlen
    body_end = body_start + int(header["body_bytes"])
    if len(data) < body_end + 32:
        raise CheckpointTruncatedError(f"{path}: expected {body_end + 32} bytes, found {len(data)}")
    body = data[body_start:body_end]
    if hashlib.sha256(body).digest() != data[body_end : body_end + 32]:
        raise CheckpointCorruptError(f"{path}: body checksum mismatch")

    d1, d2 = int(header["d1"]), int(header["d2"])
    for label, want, got in (("D1", expected_d1, d1), ("D2", expected_d2, d2)):
        if want is not None and want != got:
            raise CheckpointDimensionError(f"{path}: checkpoint {label}={got}, build expects {label}={want}")
    names = header["schema"]
    if len(names["vehicle_names"]) != d1 or len(names["link_names"]) != d2:
        raise CheckpointDimensionError(f"{path}: schema names disagree with D1/D2")

    arrays = {}
    for item in header["tensors"]:
        raw = body[item["offset"] : item["offset"] + item["nbytes"]]
        arrays[item["name"]] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(item["shape"])

    cfg = ModelConfig(
        d=d1 + d2,
        n_vehicles=int(header["n_vehicles"]),
        n_links=int(header["n_links"]),
        hidden=int(header["hidden"]),
        emb_dim=int(header["emb_dim"]),
        deep_hidden=tuple(header["deep_hidden"]),
        output_activation=header["output_activation"],
    )
    tensors = {}
    for name, shape in tensor_shapes(cfg).items():
        if name not in arrays:
            raise CheckpointDimensionError(f"{path}: missing tensor {name}")
        if tuple(arrays[name].shape) != shape:
            raise CheckpointDimensionError(f"{path}: tensor {name} has shape {arrays[name].shape}, header implies {shape}")
        tensors[name] = arrays[name]
    for name in ("schema.mean", "schema.std"):
        if arrays[name].shape != (d1 + d2,):
            raise CheckpointDimensionError(f"{path}: {name} length {arrays[name].shape} != D={d1 + d2}")
    schema = FeatureSchema(tuple(names["link_names"]), tuple(names["vehicle_names"]), arrays["schema.mean"], arrays["schema.std"])
    params = ModelParams(cfg, tensors, schema, arrays["output.scale"])
    opt = None
    if header.get("optimizer_step") is not None:
        slots = {k[4:]: v for k, v in arrays.items() if k.startswith("opt.")}
        opt = OptimizerState(int(header["optimizer_step"]), slots)
    return Checkpoint(params, opt, header.get("meta") or {})


def load_checkpoint(path, **expect) -> ModelParams:
    return read_checkpoint(path, **expect).params


def checkpoint_version(path) -> str:
    """Short identifier of a checkpoint file: format version plus body digest."""
    data = Path(path).read_bytes()
    return f"v{FORMAT_VERSION}-{hashlib.sha256(data).hexdigest()[:12]}"
