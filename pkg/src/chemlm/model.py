"""Miniature causal decoder-only transformer (Llama lineage: RMS
pre-normalization, rotary position encoding, gated feed-forward, untied
embeddings, no projection biases) with the four task losses, temperature
sampling and beam search.

All forward math runs in the module's dtype; float64 is the test/
reproducibility mode, float32 the training mode.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from chemlm.tokenizer import TokenSeq, Vocabulary, detokenize

INIT_STD = 0.02
RMS_EPS = 1e-6
ROPE_BASE = 10000.0


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    n_heads: int
    n_ctx: int
    d_model: int
    d_ff: int
    vocab_size: int

    def __post_init__(self) -> None:
        for name in ("n_layers", "n_heads", "n_ctx", "d_model", "d_ff", "vocab_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.n_ctx < 2:
            raise ValueError("n_ctx must be at least 2")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Batch:
    """Padded token batch. `boundaries[b]` is the index of the first target
    position of sequence b (0 for plain language modeling); positions before
    it contribute neither loss nor gradient. `lengths[b]` counts real tokens
    including the terminating eos. `labels` defaults to the tokens themselves
    (ordinary next-token training); masked label positions are never read."""

    tokens: torch.Tensor  # (B, T) long
    lengths: list[int]
    boundaries: list[int] = field(default_factory=list)
    slots: list[list[tuple[int, float]]] | None = None
    labels: torch.Tensor | None = None

    def __post_init__(self) -> None:
        if not self.boundaries:
            self.boundaries = [0] * self.tokens.shape[0]
        if len(self.lengths) != self.tokens.shape[0]:
            raise ValueError("lengths/batch mismatch")
        if self.labels is not None and self.labels.shape != self.tokens.shape:
            raise ValueError("labels must match token shape")


class RMSNorm(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        scale = torch.rsqrt(x.pow(2).mean(dim=-1, keepdim=True) + RMS_EPS)
        return x * scale * self.weight


def _rope_angles(t: int, d_head: int, dtype, device) -> tuple[torch.Tensor, torch.Tensor]:
    half = d_head // 2
    inv_freq = ROPE_BASE ** (
        -torch.arange(0, half, dtype=dtype, device=device) * 2.0 / d_head
    )
    pos = torch.arange(t, dtype=dtype, device=device)
    ang = torch.outer(pos, inv_freq)  # (T, half)
    return ang.cos(), ang.sin()


def _apply_rope(x: torch.Tensor, cos: torch.Tensor, sin: torch.Tensor) -> torch.Tensor:
    # x: (B, H, T, Dh); rotate the two halves of the head dimension
    x1, x2 = x.chunk(2, dim=-1)
    return torch.cat((x1 * cos - x2 * sin, x2 * cos + x1 * sin), dim=-1)


class Attention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.d_head = cfg.d_model // cfg.n_heads
        self.q_proj = nn.Linear(cfg.d_model, cfg.d_model, bias=False)
        self.k_proj = nn.Linear(cfg.d_model, cfg.d_model, bias=False)
        self.v_proj = nn.Linear(cfg.d_model, cfg.d_model, bias=False)
        self.o_proj = nn.Linear(cfg.d_model, cfg.d_model, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape

        def heads(proj):
            return proj(x).view(b, t, self.n_heads, self.d_head).transpose(1, 2)

        q, k, v = heads(self.q_proj), heads(self.k_proj), heads(self.v_proj)
        cos, sin = _rope_angles(t, self.d_head, x.dtype, x.device)
        q = _apply_rope(q, cos, sin)
        k = _apply_rope(k, cos, sin)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        mask = torch.triu(
            torch.ones(t, t, dtype=torch.bool, device=x.device), diagonal=1
        )
        scores = scores.masked_fill(mask, float("-inf"))
        attn = F.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, t, d)
        return self.o_proj(out)


class GatedMLP(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.gate_proj = nn.Linear(cfg.d_model, cfg.d_ff, bias=False)
        self.up_proj = nn.Linear(cfg.d_model, cfg.d_ff, bias=False)
        self.down_proj = nn.Linear(cfg.d_ff, cfg.d_model, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.down_proj(F.silu(self.gate_proj(x)) * self.up_proj(x))


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attn_norm = RMSNorm(cfg.d_model)
        self.attn = Attention(cfg)
        self.mlp_norm = RMSNorm(cfg.d_model)
        self.mlp = GatedMLP(cfg)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.attn_norm(x))
        return x + self.mlp(self.mlp_norm(x))


class CausalLM(nn.Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.config = cfg
        self.embed = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.final_norm = RMSNorm(cfg.d_model)
        self.lm_head = nn.Linear(cfg.d_model, cfg.vocab_size, bias=False)
        self.task_head: nn.Linear | None = None
        self.value_proj: nn.Linear | None = None
        self.cond_stats: dict[str, dict[str, float]] | None = None
        self.reset_parameters(seed)

    # -- setup -------------------------------------------------------------

    def reset_parameters(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        for module in self.modules():
            if isinstance(module, nn.Linear):
                with torch.no_grad():
                    module.weight.copy_(
                        torch.normal(
                            0.0, INIT_STD, module.weight.shape, generator=gen
                        )
                    )
            elif isinstance(module, nn.Embedding):
                with torch.no_grad():
                    module.weight.copy_(
                        torch.normal(
                            0.0, INIT_STD, module.weight.shape, generator=gen
                        )
                    )
            elif isinstance(module, RMSNorm):
                with torch.no_grad():
                    module.weight.fill_(1.0)

    def attach_task_head(self, m: int, seed: int = 1) -> None:
        """Linear map from the final token's last-layer hidden state to m
        task outputs."""
        head = nn.Linear(self.config.d_model, m, bias=False)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            head.weight.copy_(torch.normal(0.0, INIT_STD, head.weight.shape, generator=gen))
        self.task_head = head.to(self.embed.weight.dtype)

    def attach_value_proj(self, seed: int = 2) -> None:
        """Shared linear embedding for normalized continuous condition
        values."""
        proj = nn.Linear(1, self.config.d_model, bias=False)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            proj.weight.copy_(torch.normal(0.0, INIT_STD, proj.weight.shape, generator=gen))
        self.value_proj = proj.to(self.embed.weight.dtype)

    def resize_vocab(self, new_size: int, seed: int = 3) -> None:
        """Grow embedding and output rows; existing rows keep their values
        bit-exactly (prefix-stable ids contract)."""
        old = self.config.vocab_size
        if new_size < old:
            raise ValueError("vocabulary can only grow")
        if new_size == old:
            return
        gen = torch.Generator().manual_seed(seed)
        dtype = self.embed.weight.dtype

        new_embed = nn.Embedding(new_size, self.config.d_model)
        new_head = nn.Linear(self.config.d_model, new_size, bias=False)
        with torch.no_grad():
            for tensor, source in (
                (new_embed.weight, self.embed.weight),
                (new_head.weight, self.lm_head.weight),
            ):
                tensor.copy_(
                    torch.normal(0.0, INIT_STD, tensor.shape, generator=gen).to(
                        tensor.dtype
                    )
                )
                tensor[:old] = source
        self.embed = new_embed.to(dtype)
        self.lm_head = new_head.to(dtype)
        self.config = ModelConfig(**{**self.config.to_dict(), "vocab_size": new_size})

    def set_context(self, n_ctx: int) -> None:
        """Rotary positions carry no learned table, so the context length is
        just a limit and may be raised for fine-tuning on longer sequences."""
        self.config = ModelConfig(**{**self.config.to_dict(), "n_ctx": n_ctx})

    @property
    def dtype(self) -> torch.dtype:
        return self.embed.weight.dtype

    # -- forward -----------------------------------------------------------

    def forward(
        self,
        ids: torch.Tensor,
        slots: list[list[tuple[int, float]]] | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Logits and final hidden states for a (B, T) id tensor. `slots`
        replaces the embedding at each (position, normalized value) with the
        shared value projection."""
        if ids.dim() == 1:
            ids = ids.unsqueeze(0)
        if ids.shape[1] > self.config.n_ctx:
            raise ValueError(
                f"sequence length {ids.shape[1]} exceeds context {self.config.n_ctx}"
            )
        x = self.embed(ids)
        if slots and any(slots):
            if self.value_proj is None:
                raise RuntimeError("continuous slots need an attached value projection")
            x = x.clone()
            for b, entries in enumerate(slots):
                for pos, value in entries:
                    x[b, pos] = self.value_proj(
                        torch.tensor([value], dtype=x.dtype, device=x.device)
                    )
        for block in self.blocks:
            x = block(x)
        hidden = self.final_norm(x)
        return self.lm_head(hidden), hidden


# -- losses -----------------------------------------------------------------


def target_mask(batch: Batch, pad_id: int) -> torch.Tensor:
    """(B, T) bool: True where the token is a prediction target (inside the
    sequence, at or after the boundary, never position 0)."""
    b, t = batch.tokens.shape
    mask = torch.zeros(b, t, dtype=torch.bool)
    for i, (length, boundary) in enumerate(zip(batch.lengths, batch.boundaries)):
        if boundary >= length:
            raise ValueError("boundary leaves no target positions")
        mask[i, max(boundary, 1) : length] = True
    return mask


def loss_lm_from_logits(logits: torch.Tensor, batch: Batch, pad_id: int) -> torch.Tensor:
    """Masked next-token cross-entropy given precomputed logits; logit rows
    outside the target mask receive exactly zero gradient."""
    labels = batch.labels if batch.labels is not None else batch.tokens
    logp = F.log_softmax(logits[:, :-1], dim=-1)
    targets = labels[:, 1:]
    mask = target_mask(batch, pad_id)[:, 1:]
    picked = logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    picked = picked[mask]
    if picked.numel() == 0:
        raise ValueError("no target positions in batch")
    return -picked.mean()


def loss_lm(model: CausalLM, batch: Batch, pad_id: int) -> torch.Tensor:
    """Mean next-token cross-entropy over target positions. With all
    boundaries 0 this is the pre-training loss; with per-sequence boundaries
    it is the conditional seq2seq loss (prompt positions contribute zero
    loss and zero gradient)."""
    if batch.tokens.shape[0] == 0:
        raise ValueError("empty batch")
    logits, _ = model(batch.tokens, batch.slots)
    return loss_lm_from_logits(logits, batch, pad_id)


def loss_pretrain(model: CausalLM, batch: Batch, pad_id: int) -> torch.Tensor:
    plain = Batch(
        tokens=batch.tokens,
        lengths=batch.lengths,
        boundaries=[0] * batch.tokens.shape[0],
        slots=batch.slots,
    )
    return loss_lm(model, plain, pad_id)


def loss_seq2seq(model: CausalLM, batch: Batch, pad_id: int) -> torch.Tensor:
    return loss_lm(model, batch, pad_id)


def perplexity(loss: float) -> float:
    return math.exp(loss)


def last_hidden(hidden: torch.Tensor, lengths: list[int]) -> torch.Tensor:
    """Hidden vector at each sequence's final real token (the end token)."""
    idx = torch.tensor([l - 1 for l in lengths], dtype=torch.long)
    return hidden[torch.arange(hidden.shape[0]), idx]


def predict_properties(model: CausalLM, batch: Batch) -> torch.Tensor:
    """(B, m) raw task-head outputs from the final-token hidden state."""
    if model.task_head is None:
        raise RuntimeError("no task head attached")
    _, hidden = model(batch.tokens, batch.slots)
    return model.task_head(last_hidden(hidden, batch.lengths))


def loss_regression(model: CausalLM, batch: Batch, labels: torch.Tensor) -> torch.Tensor:
    """Mean over samples of the per-sample mean squared error across observed
    labels (NaN marks a missing label)."""
    preds = predict_properties(model, batch)
    return _masked_task_loss(preds, labels, lambda p, y: (p - y) ** 2)


def loss_classification(model: CausalLM, batch: Batch, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy with sigmoid probabilities; missing labels
    (NaN) are masked out of the per-sample mean."""
    preds = predict_properties(model, batch)
    return _masked_task_loss(
        preds,
        labels,
        lambda p, y: F.binary_cross_entropy_with_logits(p, y, reduction="none"),
    )


def _masked_task_loss(preds, labels, elementwise) -> torch.Tensor:
    if preds.shape != labels.shape:
        raise ValueError(f"label shape {tuple(labels.shape)} != head shape {tuple(preds.shape)}")
    observed = ~torch.isnan(labels)
    if not observed.any():
        raise ValueError("no observed labels in batch")
    safe = torch.where(observed, labels, torch.zeros_like(labels))
    losses = elementwise(preds, safe)
    losses = torch.where(observed, losses, torch.zeros_like(losses))
    per_sample = losses.sum(dim=1) / observed.sum(dim=1).clamp(min=1)
    has_any = observed.any(dim=1)
    return per_sample[has_any].mean()


# -- generation ---------------------------------------------------------------


def sample_batch(
    model: CausalLM,
    start_dist: torch.Tensor,
    n: int,
    temperature: float = 1.0,
    max_len: int = 128,
    seed: int = 0,
    vocab: Vocabulary | None = None,
) -> list[str] | list[list[int]]:
    """Draw n sequences: the first token comes from `start_dist` (a
    probability vector over the vocabulary), later tokens from the
    temperature-scaled softmax, stopping at eos or max_len. Returns
    detokenized strings when a vocabulary is given, else raw id lists."""
    if vocab is None:
        raise ValueError("vocabulary required to detect the end token")
    eos, pad = vocab.eos_id, vocab.pad_id
    dist = start_dist.to(torch.float64)
    if dist.numel() != model.config.vocab_size:
        raise ValueError("start distribution size mismatch")
    if abs(float(dist.sum()) - 1.0) > 1e-6:
        raise ValueError("start distribution must sum to 1")

    gen = torch.Generator().manual_seed(seed)
    model.eval()
    with torch.no_grad():
        seqs = torch.multinomial(dist, n, replacement=True, generator=gen).unsqueeze(1)
        alive = seqs[:, 0] != eos
        max_len = min(max_len, model.config.n_ctx)
        while seqs.shape[1] < max_len and bool(alive.any()):
            logits, _ = model(seqs)
            last = logits[:, -1, :]
            if temperature <= 1e-12:
                nxt = last.argmax(dim=-1)
            else:
                probs = F.softmax(last.to(torch.float64) / temperature, dim=-1)
                nxt = torch.multinomial(probs, 1, generator=gen).squeeze(1)
            nxt = torch.where(alive, nxt, torch.full_like(nxt, pad))
            seqs = torch.cat([seqs, nxt.unsqueeze(1)], dim=1)
            alive = alive & (nxt != eos)

    out = []
    for row in seqs.tolist():
        ids = []
        for t in row:
            if t == eos or t == pad:
                break
            ids.append(t)
        out.append(detokenize(ids, vocab))
    return out


def sample(
    model: CausalLM,
    start_dist: torch.Tensor,
    temperature: float = 1.0,
    max_len: int = 128,
    seed: int = 0,
    vocab: Vocabulary | None = None,
) -> str:
    return sample_batch(model, start_dist, 1, temperature, max_len, seed, vocab)[0]


def sample_conditional(
    model: CausalLM,
    prompt: list[int] | TokenSeq,
    n: int,
    temperature: float = 1.0,
    max_len: int = 128,
    seed: int = 0,
    vocab: Vocabulary | None = None,
    slots: list[tuple[int, float]] | None = None,
) -> list[str]:
    """Sample n continuations of a condition prompt; only the generated part
    (up to eos) is detokenized and returned."""
    if vocab is None:
        raise ValueError("vocabulary required to detect the end token")
    prompt_ids = list(prompt.ids) if isinstance(prompt, TokenSeq) else list(prompt)
    if not prompt_ids:
        raise ValueError("empty prompt")
    eos, pad = vocab.eos_id, vocab.pad_id
    gen = torch.Generator().manual_seed(seed)
    base = torch.tensor(prompt_ids, dtype=torch.long).unsqueeze(0).repeat(n, 1)
    slot_list = [slots or []] * n if slots else None
    start = base.shape[1]
    limit = min(start + max_len, model.config.n_ctx)

    model.eval()
    seqs = base
    alive = torch.ones(n, dtype=torch.bool)
    with torch.no_grad():
        while seqs.shape[1] < limit and bool(alive.any()):
            logits, _ = model(seqs, slot_list)
            last = logits[:, -1, :]
            if temperature <= 1e-12:
                nxt = last.argmax(dim=-1)
            else:
                probs = F.softmax(last.to(torch.float64) / temperature, dim=-1)
                nxt = torch.multinomial(probs, 1, generator=gen).squeeze(1)
            nxt = torch.where(alive, nxt, torch.full_like(nxt, pad))
            seqs = torch.cat([seqs, nxt.unsqueeze(1)], dim=1)
            alive = alive & (nxt != eos)

    out = []
    for row in seqs[:, start:].tolist():
        ids = []
        for t in row:
            if t == eos or t == pad:
                break
            ids.append(t)
        out.append(detokenize(ids, vocab))
    return out


def beam_search(
    model: CausalLM,
    prompt: list[int] | TokenSeq,
    beam: int = 10,
    m: int = 10,
    max_len: int = 128,
    eos_id: int | None = None,
    slots: list[tuple[int, float]] | None = None,
) -> list[tuple[tuple[int, ...], float]]:
    """Length-complete beam search over eos-terminated continuations of the
    prompt. Returns up to m (generated ids, total logprob) pairs sorted by
    logprob (ties broken by token sequence), best first. If fewer than m
    hypotheses terminate, the best unterminated ones fill the tail."""
    if eos_id is None:
        raise ValueError("eos_id required")
    prompt_ids = list(prompt.ids) if isinstance(prompt, TokenSeq) else list(prompt)
    if not prompt_ids:
        raise ValueError("empty prompt")
    if len(prompt_ids) > model.config.n_ctx:
        raise ValueError("prompt exceeds context")

    model.eval()
    live: list[tuple[tuple[int, ...], float]] = [((), 0.0)]
    finished: list[tuple[tuple[int, ...], float]] = []
    limit = min(max_len, model.config.n_ctx - len(prompt_ids))
    slot_list = [slots or []]

    with torch.no_grad():
        for _ in range(limit):
            if not live:
                break
            seqs = torch.tensor(
                [prompt_ids + list(gen) for gen, _ in live], dtype=torch.long
            )
            logits, _ = model(seqs, slot_list * len(live) if slots else None)
            logp = F.log_softmax(logits[:, -1, :].to(torch.float64), dim=-1)
            candidates: list[tuple[tuple[int, ...], float]] = []
            for i, (gen, score) in enumerate(live):
                row = logp[i]
                for v in range(row.shape[0]):
                    candidates.append((gen + (v,), score + float(row[v])))
            ended = [c for c in candidates if c[0][-1] == eos_id]
            ongoing = [c for c in candidates if c[0][-1] != eos_id]
            finished.extend(ended)
            ongoing.sort(key=lambda c: (-c[1], c[0]))
            live = ongoing[:beam]

    finished.sort(key=lambda c: (-c[1], c[0]))
    out = finished[:m]
    if len(out) < m and live:
        live.sort(key=lambda c: (-c[1], c[0]))
        out.extend(live[: m - len(out)])
    return out
