"""Optimization loop, schedule, checkpointing and evaluation for the four
task modes (pretrain, property, conditional, reaction).

Reproducibility: all randomness descends from TrainConfig.seed. In float64
(test) mode the numeric core runs single-threaded with fixed serial
reductions, so loss traces and generations are bit-identical across runs
and across CHEMLM_THREADS settings; CHEMLM_THREADS caps torch threads only
in float32 training mode.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from chemlm.augment import (
    CondNormalizer,
    Condition,
    ConditionSpec,
    build_prompt,
    sample_condition_subset,
)
from chemlm.checkpoint import load_checkpoint, save_checkpoint
from chemlm.evalstats import (
    aggregate_topk,
    mae,
    prc_auc,
    rmse,
    roc_auc,
    spearman,
    topk_accuracy,
)
from chemlm.model import (
    Batch,
    CausalLM,
    beam_search,
    loss_classification,
    loss_lm,
    loss_regression,
    predict_properties,
)
from chemlm.smiles import ParseError, canonical_smiles, parse_smiles, serialize
from chemlm.tokenizer import Vocabulary, detokenize, tokenize

TASKS = ("pretrain", "property", "conditional", "reaction")
PRECISIONS = ("float32", "float64")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 4e-4
    warmup_ratio: float = 0.05
    min_lr_factor: float = 0.1
    weight_decay: float = 0.01
    batch_size: int = 32
    epochs: int = 1
    seed: int = 0
    precision: str = "float32"
    task: str = "pretrain"
    grad_clip: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_len: int = 128

    def __post_init__(self) -> None:
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ValueError("warmup_ratio must be in [0, 1)")
        if not 0.0 < self.min_lr_factor <= 1.0:
            raise ValueError("min_lr_factor must be in (0, 1]")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup from 0 over ceil(warmup_ratio*total) steps, then cosine
    decay to min_lr_factor * learning_rate at the final step."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise ValueError("step out of range")
    warmup = math.ceil(cfg.warmup_ratio * total_steps)
    if warmup > 0 and step <= warmup:
        return cfg.learning_rate * step / warmup
    floor = cfg.min_lr_factor * cfg.learning_rate
    if total_steps == warmup:
        return cfg.learning_rate
    progress = (step - warmup) / (total_steps - warmup)
    return floor + (cfg.learning_rate - floor) * 0.5 * (1.0 + math.cos(math.pi * progress))


def configure_threads(precision: str) -> None:
    if precision == "float64":
        torch.set_num_threads(1)
        return
    cap = os.environ.get("CHEMLM_THREADS")
    if cap:
        torch.set_num_threads(max(1, int(cap)))


# -- task datasets -----------------------------------------------------------


@dataclass
class PretrainData:
    smiles: list[str]


@dataclass
class PropertyData:
    smiles: list[str]
    labels: list[list[float]]  # NaN marks a missing label
    kind: str  # "classification" | "regression"

    def __post_init__(self) -> None:
        if self.kind not in ("classification", "regression"):
            raise ValueError("kind must be classification or regression")
        if len(self.smiles) != len(self.labels):
            raise ValueError("smiles/labels mismatch")

    @property
    def n_tasks(self) -> int:
        return len(self.labels[0])


@dataclass
class ConditionalData:
    rows: list[tuple[str, dict[str, float]]]  # (smiles, {property token: value})
    normalizer: CondNormalizer


@dataclass
class ReactionData:
    pairs: list[tuple[str, str]]  # (input SMILES, output SMILES), pre-aligned


TaskData = PretrainData | PropertyData | ConditionalData | ReactionData


@dataclass
class TraceRow:
    step: int
    lr: float
    loss: float


@dataclass
class TrainResult:
    trace: list[TraceRow]
    checkpoints: list[str] = field(default_factory=list)

    def trace_csv(self) -> str:
        lines = ["step,lr,loss"]
        lines += [f"{r.step},{r.lr:.10e},{r.loss:.17e}" for r in self.trace]
        return "\n".join(lines) + "\n"


def start_token_distribution(smiles: list[str], vocab: Vocabulary) -> torch.Tensor:
    """Frequency of each token as the first token of a training sequence."""
    counts = torch.zeros(len(vocab), dtype=torch.float64)
    for s in smiles:
        seq = tokenize(s, vocab)
        counts[seq.ids[0]] += 1.0
    total = counts.sum()
    if total == 0:
        raise ValueError("empty corpus")
    return counts / total


# -- collation ----------------------------------------------------------------


def _pad(
    rows: list[list[int]],
    pad_id: int,
    boundaries: list[int] | None = None,
    slots: list[list[tuple[int, float]]] | None = None,
) -> Batch:
    width = max(len(r) for r in rows)
    tokens = torch.full((len(rows), width), pad_id, dtype=torch.long)
    lengths = []
    for i, r in enumerate(rows):
        tokens[i, : len(r)] = torch.tensor(r, dtype=torch.long)
        lengths.append(len(r))
    return Batch(
        tokens=tokens,
        lengths=lengths,
        boundaries=boundaries or [],
        slots=slots,
    )


class _Collator:
    """Builds batches for one task; enumeration (p = 1.0) re-serializes each
    molecule with a fresh random root and traversal per draw."""

    def __init__(self, data: TaskData, vocab: Vocabulary, cfg: TrainConfig):
        self.data = data
        self.vocab = vocab
        self.cfg = cfg
        self._graphs: dict[int, object] = {}
        if isinstance(data, PretrainData):
            self._cached = [tokenize(s, vocab).ids for s in data.smiles]
        else:
            self._cached = None

    def __len__(self) -> int:
        d = self.data
        if isinstance(d, PretrainData):
            return len(d.smiles)
        if isinstance(d, PropertyData):
            return len(d.smiles)
        if isinstance(d, ConditionalData):
            return len(d.rows)
        return len(d.pairs)

    def _enumerated(self, idx: int, smiles: str, rng: np.random.Generator) -> str:
        g = self._graphs.get(idx)
        if g is None:
            g = parse_smiles(smiles)
            self._graphs[idx] = g
        root = int(rng.integers(len(g.atoms)))
        return serialize(g, root=root, order="random", seed=int(rng.integers(2**32)))

    def collate(
        self, idxs: list[int], rng: np.random.Generator
    ) -> tuple[Batch, torch.Tensor | None]:
        d = self.data
        limit = self.cfg.max_len
        if isinstance(d, PretrainData):
            return _pad(
                [self._cached[i][:limit] for i in idxs], self.vocab.pad_id
            ), None

        if isinstance(d, PropertyData):
            rows = []
            for i in idxs:
                s = self._enumerated(i, d.smiles[i], rng)
                rows.append(tokenize(s, self.vocab).ids[:limit])
            labels = torch.tensor([d.labels[i] for i in idxs], dtype=torch.float64)
            return _pad(rows, self.vocab.pad_id), labels

        if isinstance(d, ConditionalData):
            rows, bounds, slots = [], [], []
            for i in idxs:
                smiles, props = d.rows[i]
                spec = ConditionSpec(
                    [Condition(k, v, "continuous") for k, v in sorted(props.items())]
                )
                subset = sample_condition_subset(spec, seed=int(rng.integers(2**32)))
                prompt = build_prompt(subset, self.vocab, d.normalizer)
                target = tokenize(self._enumerated(i, smiles, rng), self.vocab).ids
                row = (prompt.seq.ids + target)[:limit]
                if prompt.seq.boundary >= len(row):
                    continue  # prompt alone exceeds the length budget
                rows.append(row)
                bounds.append(prompt.seq.boundary)
                slots.append(prompt.slots)
            if not rows:
                raise ValueError("every example in batch exceeded max_len")
            return _pad(rows, self.vocab.pad_id, bounds, slots), None

        rows, bounds = [], []
        sep = self.vocab.special.get("<sep>")
        if sep is None:
            raise ValueError("reaction task needs a <sep> token in the vocabulary")
        for i in idxs:
            inp, out = d.pairs[i]
            in_ids = tokenize(inp, self.vocab, append_eos=False).ids + [sep]
            out_ids = tokenize(out, self.vocab).ids
            row = (in_ids + out_ids)[:limit]
            if len(in_ids) >= len(row):
                continue  # no target tokens left after truncation
            rows.append(row)
            bounds.append(len(in_ids))
        if not rows:
            raise ValueError("every example in batch exceeded max_len")
        return _pad(rows, self.vocab.pad_id, bounds), None


def _compute_loss(model, data, batch, labels, pad_id):
    if isinstance(data, PropertyData):
        labels = labels.to(model.dtype)
        if data.kind == "regression":
            return loss_regression(model, batch, labels)
        return loss_classification(model, batch, labels)
    return loss_lm(model, batch, pad_id)


def train(
    model: CausalLM,
    data: TaskData,
    cfg: TrainConfig,
    vocab: Vocabulary,
    out_dir: str | Path | None = None,
) -> TrainResult:
    """Run the optimization loop; returns the loss trace and per-epoch
    checkpoint paths (when out_dir is given). Raises TrainingDiverged on a
    non-finite loss."""
    configure_threads(cfg.precision)
    if cfg.max_len > model.config.n_ctx:
        raise ValueError(
            f"max_len {cfg.max_len} exceeds model context {model.config.n_ctx}"
        )
    model = model.double() if cfg.precision == "float64" else model.float()
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    collator = _Collator(data, vocab, cfg)
    n = len(collator)
    if n == 0:
        raise ValueError("empty dataset")
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch

    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.AdamW(
        params,
        lr=cfg.learning_rate,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )

    result = TrainResult(trace=[])
    step = 0
    extra_meta = {"train_config": json.loads(cfg.to_json())}
    if isinstance(data, PretrainData):
        extra_meta["start_token_probs"] = (
            start_token_distribution(data.smiles, vocab).tolist()
        )

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        model.train()
        for b in range(steps_per_epoch):
            idxs = [int(i) for i in order[b * cfg.batch_size : (b + 1) * cfg.batch_size]]
            batch, labels = collator.collate(idxs, rng)
            step += 1
            lr = lr_at(step, total_steps, cfg)
            for group in opt.param_groups:
                group["lr"] = lr
            loss = _compute_loss(model, data, batch, labels, vocab.pad_id)
            loss_val = float(loss.detach())
            if not math.isfinite(loss_val):
                raise TrainingDiverged(
                    f"non-finite loss {loss_val} at step {step} (lr {lr:.3e})"
                )
            opt.zero_grad(set_to_none=True)
            loss.backward()
            if cfg.grad_clip and cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
            opt.step()
            result.trace.append(TraceRow(step=step, lr=lr, loss=loss_val))
        if out_dir is not None:
            path = Path(out_dir) / f"epoch_{epoch + 1:03d}.ckpt"
            path.parent.mkdir(parents=True, exist_ok=True)
            save_checkpoint(
                model, path, vocab_hash=vocab.content_hash(), extra=extra_meta
            )
            result.checkpoints.append(str(path))
    return result


# -- evaluation ---------------------------------------------------------------


def next_token_accuracy(model: CausalLM, batch: Batch, pad_id: int) -> float:
    from chemlm.model import target_mask

    with torch.no_grad():
        logits, _ = model(batch.tokens, batch.slots)
    preds = logits[:, :-1].argmax(dim=-1)
    labels = batch.tokens[:, 1:]
    mask = target_mask(batch, pad_id)[:, 1:]
    correct = (preds == labels) & mask
    return float(correct.sum()) / float(mask.sum())


@dataclass
class ReactionEvalCase:
    inputs: list[str]  # n augmented input spellings
    truth: str  # canonical output


def evaluate(
    checkpoint: str | Path,
    data,
    mode: str,
    vocab: Vocabulary,
    *,
    precision: str = "float32",
    batch_size: int = 64,
    beam: int = 10,
    n_best: int = 10,
    ks: tuple[int, ...] = (1, 3, 5),
    max_len: int = 128,
) -> dict:
    """Metric bundle for a stored checkpoint. The caller's vocabulary must
    hash-match the checkpoint's."""
    configure_threads(precision)
    dtype = torch.float64 if precision == "float64" else torch.float32
    model, meta = load_checkpoint(checkpoint, dtype=dtype)
    if meta["vocab_hash"] != vocab.content_hash():
        raise ValueError("vocabulary hash mismatch between caller and checkpoint")
    model.eval()

    if mode == "pretrain":
        collator = _Collator(PretrainData(list(data.smiles)), vocab, TrainConfig())
        rng = np.random.default_rng(0)
        losses = []
        accs = []
        count = 0
        for start in range(0, len(collator), batch_size):
            idxs = list(range(start, min(start + batch_size, len(collator))))
            batch, _ = collator.collate(idxs, rng)
            with torch.no_grad():
                loss = loss_lm(model, batch, vocab.pad_id)
            losses.append(float(loss) * len(idxs))
            accs.append(next_token_accuracy(model, batch, vocab.pad_id) * len(idxs))
            count += len(idxs)
        mean_loss = sum(losses) / count
        return {
            "mode": mode,
            "loss": mean_loss,
            "perplexity": math.exp(mean_loss),
            "next_token_accuracy": sum(accs) / count,
        }

    if mode == "property":
        assert isinstance(data, PropertyData)
        preds = []
        for start in range(0, len(data.smiles), batch_size):
            chunk = data.smiles[start : start + batch_size]
            rows = [tokenize(canonical_smiles(s), vocab).ids for s in chunk]
            batch = _pad(rows, vocab.pad_id)
            with torch.no_grad():
                preds.append(predict_properties(model, batch))
        pred = torch.cat(preds).to(torch.float64).numpy()
        labels = np.array(data.labels, dtype=np.float64)
        out: dict = {"mode": mode, "kind": data.kind, "per_task": []}
        for t in range(labels.shape[1]):
            observed = ~np.isnan(labels[:, t])
            y = labels[observed, t]
            p = pred[observed, t]
            if data.kind == "classification":
                scores = 1.0 / (1.0 + np.exp(-p))
                entry = {
                    "roc_auc": roc_auc(y, scores),
                    "prc_auc": prc_auc(y, scores),
                }
            else:
                entry = {
                    "rmse": rmse(y, p),
                    "mae": mae(y, p),
                    "spearman": spearman(y, p),
                }
            out["per_task"].append(entry)
        for key in out["per_task"][0]:
            out[key] = float(np.mean([e[key] for e in out["per_task"]]))
        return out

    if mode == "reaction":
        sep = vocab.special.get("<sep>")
        if sep is None:
            raise ValueError("reaction evaluation needs a <sep> token")
        hits = {k: 0 for k in ks}
        for case in data:
            beams = []
            for inp in case.inputs:
                prompt = tokenize(inp, vocab, append_eos=False).ids + [sep]
                raw = beam_search(
                    model, prompt, beam=beam, m=n_best,
                    max_len=max_len, eos_id=vocab.eos_id,
                )
                decoded = []
                for ids, logprob in raw:
                    text = detokenize(list(ids), vocab)
                    try:
                        decoded.append((canonical_smiles(text), logprob))
                    except (ParseError, ValueError):
                        continue
                if decoded:
                    beams.append(decoded)
            if not beams:
                continue
            ranked = aggregate_topk(beams, max(ks))
            acc = topk_accuracy(ranked, case.truth, ks)
            for k in ks:
                hits[k] += int(acc[k])
        n_cases = len(data)
        return {
            "mode": mode,
            "n_cases": n_cases,
            **{f"top_{k}": hits[k] / n_cases for k in ks},
        }

    raise ValueError(f"unknown evaluation mode {mode!r}")
