"""Low-rank adaptation of the transformer's block linear layers.

attach() wraps every linear inside the transformer blocks (q, k, v, o, gate,
up, down: 7 per layer) with a frozen base weight plus trainable rank-r
factors B @ A scaled by alpha/r. B starts at zero, so the adapted model is
initially bit-identical to the base model. Embeddings, norm scales and the
output projection are frozen; the task head and condition value projection
stay fully trainable.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from chemlm.model import Attention, CausalLM, GatedMLP, ModelConfig

_TARGETS_ATTN = ("q_proj", "k_proj", "v_proj", "o_proj")
_TARGETS_MLP = ("gate_proj", "up_proj", "down_proj")
TARGETS_PER_LAYER = len(_TARGETS_ATTN) + len(_TARGETS_MLP)  # 7


@dataclass(frozen=True)
class LoraConfig:
    rank: int
    alpha: float = 1.0
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


class LoraLinear(nn.Module):
    """base(x) + scale * (dropout(x) @ A^T) @ B^T with frozen base."""

    def __init__(self, base: nn.Linear, cfg: LoraConfig, generator: torch.Generator):
        super().__init__()
        out_features, in_features = base.weight.shape
        if cfg.rank > min(out_features, in_features):
            raise ValueError(
                f"rank {cfg.rank} exceeds min dimension of a {out_features}x{in_features} layer"
            )
        self.base = base
        self.base.weight.requires_grad_(False)
        dtype = base.weight.dtype
        a = torch.normal(
            0.0, 0.02, (cfg.rank, in_features), generator=generator
        ).to(dtype)
        self.lora_a = nn.Parameter(a)
        self.lora_b = nn.Parameter(torch.zeros(out_features, cfg.rank, dtype=dtype))
        self.scale = cfg.alpha / cfg.rank
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        adapter = self.dropout(x) @ self.lora_a.T @ self.lora_b.T
        return self.base(x) + self.scale * adapter

    def merged_weight(self) -> torch.Tensor:
        return self.base.weight + self.scale * (self.lora_b @ self.lora_a)


def _block_linears(model: CausalLM):
    for layer, block in enumerate(model.blocks):
        for name in _TARGETS_ATTN:
            yield block.attn, name, layer
        for name in _TARGETS_MLP:
            yield block.mlp, name, layer


def attach(model: CausalLM, cfg: LoraConfig, seed: int = 0) -> CausalLM:
    """Wrap all block linears in-place; freezes everything except the
    adapters, the task head, and the value projection. Returns the model."""
    if getattr(model, "lora_config", None) is not None:
        raise RuntimeError("adapters already attached")
    generator = torch.Generator().manual_seed(seed)

    for param in model.parameters():
        param.requires_grad_(False)

    for owner, name, _ in _block_linears(model):
        base = getattr(owner, name)
        if isinstance(base, LoraLinear):
            raise RuntimeError("adapters already attached")
        setattr(owner, name, LoraLinear(base, cfg, generator))

    for head in (model.task_head, model.value_proj):
        if head is not None:
            for param in head.parameters():
                param.requires_grad_(True)

    model.lora_config = cfg
    return model


def merge(model: CausalLM) -> CausalLM:
    """Fold the adapters into the base weights (W' = W + scale * B @ A) and
    restore plain linear layers; merged and adapted forwards agree within
    float tolerance. Double merge is rejected."""
    if getattr(model, "lora_config", None) is None:
        raise RuntimeError("no adapters attached")
    for owner, name, _ in _block_linears(model):
        wrapped = getattr(owner, name)
        assert isinstance(wrapped, LoraLinear)
        base = wrapped.base
        with torch.no_grad():
            base.weight.copy_(wrapped.merged_weight())
        base.weight.requires_grad_(True)
        setattr(owner, name, base)
    for param in model.parameters():
        param.requires_grad_(True)
    model.lora_config = None
    return model


def param_count(cfg: LoraConfig, model_cfg: ModelConfig, head_outputs: int = 0,
                with_value_proj: bool = False) -> int:
    """Closed-form trainable-parameter count: sum over targeted matrices of
    r*(in+out), plus head parameters. Must equal the tensor walk exactly."""
    d, f = model_cfg.d_model, model_cfg.d_ff
    per_layer = 4 * cfg.rank * (d + d) + 2 * cfg.rank * (d + f) + cfg.rank * (f + d)
    total = model_cfg.n_layers * per_layer
    total += head_outputs * d
    if with_value_proj:
        total += d
    return total


def trainable_param_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def adapter_state_dict(model: CausalLM) -> dict[str, torch.Tensor]:
    """Only the tensors an adapter checkpoint stores: A/B factors plus the
    task head and value projection."""
    if getattr(model, "lora_config", None) is None:
        raise RuntimeError("no adapters attached")
    out: dict[str, torch.Tensor] = {}
    for name, param in model.named_parameters():
        if "lora_a" in name or "lora_b" in name:
            out[name] = param.detach()
        elif name.startswith(("task_head.", "value_proj.")):
            out[name] = param.detach()
    return out
