"""Checkpoint container.

Layout: 8-byte magic "CHEMFM01", little-endian uint64 metadata length, a
JSON metadata block (model config, vocabulary hash, condition-normalization
statistics, adapter config, free-form extras, and the tensor manifest of
(name, shape, byte offset)), then the raw tensors as little-endian float32
in manifest order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from chemlm.lora import LoraConfig, LoraLinear, adapter_state_dict, attach
from chemlm.model import CausalLM, ModelConfig

MAGIC = b"CHEMFM01"


class CheckpointError(ValueError):
    pass


def _tensor_bytes(t: torch.Tensor) -> bytes:
    arr = t.detach().cpu().to(torch.float32).numpy().astype("<f4", copy=False)
    return arr.tobytes()


def _pack(meta: dict, tensors: dict[str, torch.Tensor]) -> bytes:
    manifest = []
    blob = bytearray()
    for name, tensor in tensors.items():
        data = _tensor_bytes(tensor)
        manifest.append(
            {"name": name, "shape": list(tensor.shape), "offset": len(blob)}
        )
        blob.extend(data)
    meta = dict(meta)
    meta["tensors"] = manifest
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    return MAGIC + struct.pack("<Q", len(meta_bytes)) + meta_bytes + bytes(blob)


def _unpack(data: bytes) -> tuple[dict, dict[str, torch.Tensor]]:
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    (meta_len,) = struct.unpack("<Q", data[8:16])
    meta = json.loads(data[16 : 16 + meta_len].decode())
    blob = data[16 + meta_len :]
    tensors = {}
    for entry in meta["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start).reshape(shape)
        tensors[entry["name"]] = torch.from_numpy(arr.copy())
    return meta, tensors


def save_checkpoint(
    model: CausalLM,
    path: str | Path,
    *,
    vocab_hash: str,
    extra: dict | None = None,
) -> str:
    """Write the model; returns the file's sha256 (used by run manifests)."""
    head_m = model.task_head.weight.shape[0] if model.task_head is not None else None
    lora_cfg = getattr(model, "lora_config", None)
    meta = {
        "config": model.config.to_dict(),
        "vocab_hash": vocab_hash,
        "cond_stats": model.cond_stats,
        "adapter": lora_cfg.to_dict() if lora_cfg is not None else None,
        "task_head_outputs": head_m,
        "has_value_proj": model.value_proj is not None,
        "extra": extra or {},
    }
    payload = _pack(meta, dict(model.state_dict()))
    Path(path).write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def load_checkpoint(
    path: str | Path, *, dtype: torch.dtype = torch.float32
) -> tuple[CausalLM, dict]:
    """Rebuild the model (with head / value projection / adapters as saved)
    and load tensors by name."""
    data = Path(path).read_bytes()
    meta, tensors = _unpack(data)
    cfg = ModelConfig(**meta["config"])
    model = CausalLM(cfg, seed=0)
    if meta.get("task_head_outputs"):
        model.attach_task_head(int(meta["task_head_outputs"]))
    if meta.get("has_value_proj"):
        model.attach_value_proj()
    if meta.get("adapter"):
        attach(model, LoraConfig(**meta["adapter"]))
    model.cond_stats = meta.get("cond_stats")
    missing, unexpected = model.load_state_dict(tensors, strict=False)
    if missing or unexpected:
        raise CheckpointError(f"state mismatch: missing={missing} unexpected={unexpected}")
    model = model.to(dtype)
    return model, meta


def checkpoint_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def checkpoint_vocab_hash(path: str | Path) -> str:
    data = Path(path).read_bytes()
    meta, _ = _unpack(data)
    return meta["vocab_hash"]


def save_adapter_checkpoint(
    model: CausalLM,
    path: str | Path,
    *,
    base_checkpoint_hash: str,
    vocab_hash: str,
    extra: dict | None = None,
) -> str:
    """Adapter-only container: A/B factors plus head tensors, with the base
    checkpoint's hash recorded for pairing."""
    lora_cfg = getattr(model, "lora_config", None)
    if lora_cfg is None:
        raise CheckpointError("model has no adapters attached")
    meta = {
        "config": model.config.to_dict(),
        "vocab_hash": vocab_hash,
        "cond_stats": model.cond_stats,
        "adapter": lora_cfg.to_dict(),
        "base_checkpoint": base_checkpoint_hash,
        "task_head_outputs": (
            model.task_head.weight.shape[0] if model.task_head is not None else None
        ),
        "has_value_proj": model.value_proj is not None,
        "extra": extra or {},
    }
    payload = _pack(meta, adapter_state_dict(model))
    Path(path).write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def load_adapter_into(model: CausalLM, path: str | Path) -> CausalLM:
    """Apply an adapter checkpoint onto a freshly attached base model."""
    data = Path(path).read_bytes()
    meta, tensors = _unpack(data)
    if getattr(model, "lora_config", None) is None:
        if meta.get("task_head_outputs") and model.task_head is None:
            model.attach_task_head(int(meta["task_head_outputs"]))
        if meta.get("has_value_proj") and model.value_proj is None:
            model.attach_value_proj()
        attach(model, LoraConfig(**meta["adapter"]))
    state = dict(model.state_dict())
    dtype = model.embed.weight.dtype
    with torch.no_grad():
        for name, tensor in tensors.items():
            if name not in state:
                raise CheckpointError(f"adapter tensor {name} has no slot in model")
            state[name].copy_(tensor.to(dtype))
    model.cond_stats = meta.get("cond_stats")
    return model
