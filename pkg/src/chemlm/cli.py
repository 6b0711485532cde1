"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
Every command writes a run manifest (command, config, seeds, inputs/outputs,
vocabulary hash, checkpoint hashes, timestamp) beside its outputs. All
randomness flows from --seed; CHEMLM_THREADS caps worker parallelism.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import sys
from pathlib import Path

import click
import torch

from chemlm import __version__
from chemlm.augment import (
    CondNormalizer,
    Condition,
    ConditionSpec,
    ReactionRecord,
    augment_reactions,
    build_prompt,
    enumerate_smiles,
    read_conditions_csv,
    read_reactions,
    read_smi,
)
from chemlm.checkpoint import checkpoint_hash, load_checkpoint, save_checkpoint
from chemlm.metrics import descriptor_table, descriptors, generation_metrics, mad
from chemlm.model import CausalLM, ModelConfig, sample_batch, sample_conditional
from chemlm.smiles import (
    KekulizeError,
    ParseError,
    canonical_smiles,
    check_validity,
    parse_smiles,
)
from chemlm.tokenizer import (
    TokenizeError,
    Vocabulary,
    build_base_vocab,
    extend_with_task_tokens,
    tokenize,
    vocab_census,
)
from chemlm.trainer import (
    ConditionalData,
    PretrainData,
    PropertyData,
    ReactionData,
    TrainConfig,
    TrainingDiverged,
    configure_threads,
    train,
)

click.UsageError.exit_code = 1  # 1 = usage, 2 = data, 3 = divergence

EXIT_DATA = 2
EXIT_DIVERGED = 3


def _manifest(command: str, out_path: Path, **fields) -> None:
    payload = {
        "command": command,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        **fields,
    }
    path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    if out_path.is_dir():
        path = out_path / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_lines(path: Path) -> list[tuple[str, str | None]]:
    return read_smi(path.read_text())


def _vocab_from_checkpoint(meta: dict) -> Vocabulary:
    stored = meta.get("extra", {}).get("vocab")
    if stored is None:
        raise click.ClickException("checkpoint does not embed its vocabulary")
    return Vocabulary.from_json(json.dumps(stored))


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Chemical language modeling toolkit."""


# -- file utilities -----------------------------------------------------------


@main.command("tokenize")
@click.argument("input_file", type=click.Path(exists=True, path_type=Path))
@click.argument("output_file", type=click.Path(path_type=Path))
@click.option("--strict", is_flag=True, help="fail on the first bad line")
def cmd_tokenize(input_file: Path, output_file: Path, strict: bool) -> None:
    """Token-id lines (space separated) for each SMILES line."""
    vocab = build_base_vocab()
    lines = _load_lines(input_file)
    out, errors = [], []
    for lineno, (smiles, _) in enumerate(lines, start=1):
        try:
            seq = tokenize(smiles, vocab)
            out.append(" ".join(map(str, seq.ids)))
        except TokenizeError as exc:
            errors.append(f"line {lineno}: {exc}")
            out.append("")
    output_file.write_text("\n".join(out) + "\n")
    for err in errors:
        click.echo(err, err=True)
    _manifest(
        "tokenize", output_file,
        inputs=[str(input_file)], outputs=[str(output_file)],
        vocab_hash=vocab.content_hash(), n_errors=len(errors),
        census=vocab_census(),
    )
    if errors and strict:
        sys.exit(EXIT_DATA)


@main.command("canonicalize")
@click.argument("input_file", type=click.Path(exists=True, path_type=Path))
@click.argument("output_file", type=click.Path(path_type=Path))
@click.option("--strict", is_flag=True)
def cmd_canonicalize(input_file: Path, output_file: Path, strict: bool) -> None:
    """Canonical SMILES per line (empty line where parsing failed)."""
    lines = _load_lines(input_file)
    out, errors = [], []
    for lineno, (smiles, _) in enumerate(lines, start=1):
        try:
            out.append(canonical_smiles(smiles))
        except (ParseError, KekulizeError) as exc:
            errors.append(f"line {lineno}: {exc}")
            out.append("")
    output_file.write_text("\n".join(out) + "\n")
    for err in errors:
        click.echo(err, err=True)
    _manifest(
        "canonicalize", output_file,
        inputs=[str(input_file)], outputs=[str(output_file)], n_errors=len(errors),
    )
    if errors and strict:
        sys.exit(EXIT_DATA)


@main.command("validate")
@click.argument("input_file", type=click.Path(exists=True, path_type=Path))
@click.option("--report", type=click.Path(path_type=Path), default=None)
@click.option("--strict", is_flag=True)
def cmd_validate(input_file: Path, report: Path | None, strict: bool) -> None:
    """Per-line validity verdicts; summary on stdout."""
    lines = _load_lines(input_file)
    rows, n_bad = [], 0
    for lineno, (smiles, _) in enumerate(lines, start=1):
        try:
            verdict = check_validity(parse_smiles(smiles))
            if verdict.valid:
                rows.append(f"line {lineno}: valid")
            else:
                n_bad += 1
                rows.append(f"line {lineno}: invalid: {verdict.reason}")
        except ParseError as exc:
            n_bad += 1
            rows.append(f"line {lineno}: parse error: {exc}")
    text = "\n".join(rows) + ("\n" if rows else "")
    if report is not None:
        report.write_text(text)
        _manifest(
            "validate", report,
            inputs=[str(input_file)], outputs=[str(report)],
            n_lines=len(lines), n_invalid=n_bad,
        )
    else:
        click.echo(text, nl=False)
    click.echo(f"{len(lines) - n_bad}/{len(lines)} valid", err=True)
    if n_bad and strict:
        sys.exit(EXIT_DATA)


@main.command("augment")
@click.argument("input_file", type=click.Path(exists=True, path_type=Path))
@click.argument("output_file", type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(["enumerate", "rsmiles"]), required=True)
@click.option("--folds", type=int, required=True)
@click.option("--seed", type=int, default=0)
def cmd_augment(input_file: Path, output_file: Path, mode: str, folds: int, seed: int) -> None:
    """Enumerated SMILES or root-aligned reaction pairs, folds x input."""
    if folds < 1:
        raise click.UsageError("--folds must be >= 1")
    errors = []
    out_lines: list[str] = []
    if mode == "enumerate":
        for lineno, (smiles, _) in enumerate(_load_lines(input_file), start=1):
            try:
                out_lines.extend(enumerate_smiles(smiles, folds, seed=seed + lineno))
            except (ParseError, ValueError) as exc:
                errors.append(f"line {lineno}: {exc}")
    else:
        try:
            records = read_reactions(input_file.read_text())
        except (ParseError, ValueError) as exc:
            click.echo(f"cannot read reactions: {exc}", err=True)
            sys.exit(EXIT_DATA)
        ok_records = []
        for lineno, record in enumerate(records, start=1):
            if not record.mapped_product_atoms():
                errors.append(f"line {lineno}: no mapped product atoms")
            else:
                ok_records.append(record)
        pairs = augment_reactions(ok_records, folds, seed=seed)
        out_lines = [f"{i}>>{o}" for i, o in pairs]
    output_file.write_text("\n".join(out_lines) + "\n")
    for err in errors:
        click.echo(err, err=True)
    _manifest(
        "augment", output_file,
        inputs=[str(input_file)], outputs=[str(output_file)],
        mode=mode, folds=folds, seed=seed, n_errors=len(errors),
        n_output_lines=len(out_lines),
    )
    if errors:
        sys.exit(EXIT_DATA)


# -- training -----------------------------------------------------------------


def _model_options(fn):
    for opt in reversed(
        [
            click.option("--layers", type=int, default=2, show_default=True),
            click.option("--heads", type=int, default=8, show_default=True),
            click.option("--d-model", type=int, default=64, show_default=True),
            click.option("--d-ff", type=int, default=176, show_default=True),
            click.option("--ctx", type=int, default=128, show_default=True),
        ]
    ):
        fn = opt(fn)
    return fn


def _read_config(config: Path | None, **overrides) -> TrainConfig:
    if config is not None:
        cfg = TrainConfig.from_json(config.read_text())
    else:
        cfg = TrainConfig()
    merged = {**json.loads(cfg.to_json()), **{k: v for k, v in overrides.items() if v is not None}}
    return TrainConfig(**merged)


@main.command("pretrain")
@click.option("--data", "data_file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--config", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--seed", type=int, default=None)
@_model_options
def cmd_pretrain(data_file, out_dir, config, seed, layers, heads, d_model, d_ff, ctx) -> None:
    """Causal-LM pre-training on a .smi corpus."""
    vocab = build_base_vocab()
    smiles = [s for s, _ in _load_lines(data_file)]
    if not smiles:
        click.echo("empty corpus", err=True)
        sys.exit(EXIT_DATA)
    cfg = _read_config(config, seed=seed, task="pretrain")
    mcfg = ModelConfig(
        n_layers=layers, n_heads=heads, n_ctx=ctx,
        d_model=d_model, d_ff=d_ff, vocab_size=len(vocab),
    )
    model = CausalLM(mcfg, seed=cfg.seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = train(model, PretrainData(smiles), cfg, vocab, out_dir=out_dir)
    except TrainingDiverged as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_DIVERGED)
    (out_dir / "trace.csv").write_text(result.trace_csv())
    final = out_dir / "model.ckpt"
    from chemlm.trainer import start_token_distribution

    save_checkpoint(
        model, final, vocab_hash=vocab.content_hash(),
        extra={
            "train_config": json.loads(cfg.to_json()),
            "start_token_probs": start_token_distribution(smiles, vocab).tolist(),
            "vocab": json.loads(vocab.to_json()),
        },
    )
    _manifest(
        "pretrain", out_dir,
        config=str(config) if config else None, seeds=[cfg.seed],
        inputs=[str(data_file)], outputs=[str(final), str(out_dir / "trace.csv")],
        vocab_hash=vocab.content_hash(),
        checkpoint_hashes={final.name: _file_hash(final)},
    )
    click.echo(f"final loss {result.trace[-1].loss:.4f} over {len(result.trace)} steps")


@main.command("finetune")
@click.option("--task", type=click.Choice(["property", "conditional", "reaction"]), required=True)
@click.option("--data", "data_file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--checkpoint", "ckpt", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--config", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lora", type=str, default=None, help="r,alpha,dropout")
@click.option("--label-kind", type=click.Choice(["classification", "regression"]), default="regression")
@click.option("--ctx", type=int, default=None, help="raise the context limit for long pairs")
def cmd_finetune(task, data_file, ckpt, out_dir, config, seed, lora, label_kind, ctx) -> None:
    """Fine-tune a pre-trained checkpoint for one task mode."""
    model, meta = load_checkpoint(ckpt)
    base_vocab = _vocab_from_checkpoint(meta)
    cfg = _read_config(config, seed=seed, task=task)
    if ctx is not None:
        model.set_context(ctx)
        cfg = TrainConfig(**{**json.loads(cfg.to_json()), "max_len": ctx})
    out_dir.mkdir(parents=True, exist_ok=True)

    if task == "property":
        rows = read_conditions_csv(data_file.read_text())
        names = sorted({k for _, props in rows for k in props})
        if not names:
            click.echo("no label columns found", err=True)
            sys.exit(EXIT_DATA)
        labels = [
            [props.get(name, float("nan")) for name in names] for _, props in rows
        ]
        data = PropertyData([s for s, _ in rows], labels, kind=label_kind)
        vocab = base_vocab
        model.attach_task_head(len(names), seed=cfg.seed)
    elif task == "conditional":
        rows = read_conditions_csv(data_file.read_text())
        names = sorted({k for _, props in rows for k in props})
        tokens = [f"<{n}>" for n in names] + ["<val>", "<sep>"]
        vocab = extend_with_task_tokens(base_vocab, tokens)
        model.resize_vocab(len(vocab), seed=cfg.seed)
        model.attach_value_proj(seed=cfg.seed)
        values: dict[str, list[float]] = {f"<{n}>": [] for n in names}
        tagged = []
        for smiles, props in rows:
            tagged.append((smiles, {f"<{k}>": v for k, v in props.items()}))
            for k, v in props.items():
                values[f"<{k}>"].append(v)
        normalizer = CondNormalizer.fit({k: v for k, v in values.items() if v})
        model.cond_stats = {
            name: {"mean": normalizer.mean[name], "std": normalizer.std[name]}
            for name in normalizer.mean
        }
        data = ConditionalData(tagged, normalizer)
    else:
        vocab = extend_with_task_tokens(base_vocab, ["<sep>"])
        model.resize_vocab(len(vocab), seed=cfg.seed)
        pairs = []
        for line in data_file.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ">>" not in line:
                click.echo(f"bad reaction line: {line}", err=True)
                sys.exit(EXIT_DATA)
            left, right = line.split(">>", 1)
            pairs.append((left.strip(), right.strip()))
        data = ReactionData(pairs)

    if lora:
        from chemlm.lora import LoraConfig, attach

        try:
            r, alpha, dropout = lora.split(",")
            lcfg = LoraConfig(rank=int(r), alpha=float(alpha), dropout=float(dropout))
        except ValueError as exc:
            raise click.UsageError(f"--lora expects r,alpha,dropout: {exc}")
        attach(model, lcfg, seed=cfg.seed)

    try:
        result = train(model, data, cfg, vocab, out_dir=out_dir)
    except TrainingDiverged as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_DIVERGED)
    (out_dir / "trace.csv").write_text(result.trace_csv())
    final = out_dir / "model.ckpt"
    save_checkpoint(
        model, final, vocab_hash=vocab.content_hash(),
        extra={
            "train_config": json.loads(cfg.to_json()),
            "task": task,
            "vocab": json.loads(vocab.to_json()),
            "base_checkpoint": checkpoint_hash(ckpt),
        },
    )
    _manifest(
        "finetune", out_dir,
        config=str(config) if config else None, seeds=[cfg.seed],
        inputs=[str(data_file), str(ckpt)],
        outputs=[str(final), str(out_dir / "trace.csv")],
        vocab_hash=vocab.content_hash(),
        checkpoint_hashes={final.name: _file_hash(final), Path(ckpt).name: checkpoint_hash(ckpt)},
        task=task, lora=lora,
    )
    click.echo(f"final loss {result.trace[-1].loss:.4f}")


# -- generation and benchmarking ----------------------------------------------


@main.command("generate")
@click.option("--checkpoint", "ckpt", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--n", "n_samples", type=int, default=100, show_default=True)
@click.option("--temperature", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--max-len", type=int, default=128)
@click.option("--conditions", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--out", "out_file", type=click.Path(path_type=Path), required=True)
def cmd_generate(ckpt, n_samples, temperature, seed, max_len, conditions, out_file) -> None:
    """Sample molecules; start tokens follow the training frequency
    distribution (unconditional) or a conditions CSV (conditional), in which
    case a MAD report over the native descriptor set is written too."""
    configure_threads("float32")
    model, meta = load_checkpoint(ckpt)
    vocab = _vocab_from_checkpoint(meta)
    model.eval()

    if conditions is None:
        probs = meta.get("extra", {}).get("start_token_probs")
        if probs is None:
            click.echo("checkpoint lacks a start-token distribution", err=True)
            sys.exit(EXIT_DATA)
        dist = torch.tensor(probs, dtype=torch.float64)
        if len(dist) < len(vocab):  # vocabulary grew during fine-tuning
            dist = torch.cat([dist, torch.zeros(len(vocab) - len(dist), dtype=torch.float64)])
        dist = dist / dist.sum()
        samples = sample_batch(
            model, dist, n_samples, temperature, max_len, seed, vocab
        )
        out_file.write_text("\n".join(samples) + "\n")
        _manifest(
            "generate", out_file,
            seeds=[seed], inputs=[str(ckpt)], outputs=[str(out_file)],
            vocab_hash=vocab.content_hash(),
            checkpoint_hashes={Path(ckpt).name: checkpoint_hash(ckpt)},
            n=n_samples, temperature=temperature,
        )
        return

    rows = read_conditions_csv(conditions.read_text())
    if model.cond_stats is None:
        click.echo("checkpoint has no condition statistics", err=True)
        sys.exit(EXIT_DATA)
    normalizer = CondNormalizer(
        mean={k: v["mean"] for k, v in model.cond_stats.items()},
        std={k: v["std"] for k, v in model.cond_stats.items()},
    )
    all_samples: list[str] = []
    wanted: dict[str, list[float]] = {}
    realized: dict[str, list[float]] = {}
    for row_idx, (_, props) in enumerate(rows):
        spec = ConditionSpec(
            [Condition(f"<{k}>", v, "continuous") for k, v in sorted(props.items())]
        )
        prompt = build_prompt(spec, vocab, normalizer)
        samples = sample_conditional(
            model, prompt.seq, n_samples, temperature, max_len,
            seed + row_idx, vocab, slots=prompt.slots,
        )
        all_samples.extend(samples)
        for s in samples:
            try:
                g = parse_smiles(s)
                if not check_validity(g):
                    continue
                vec = descriptors(g).to_dict()
            except ParseError:
                continue
            for k, v in props.items():
                if k in vec:
                    wanted.setdefault(k, []).append(float(v))
                    realized.setdefault(k, []).append(float(vec[k]))
    out_file.write_text("\n".join(all_samples) + "\n")
    mad_report = {k: mad(wanted[k], realized[k]) for k in sorted(wanted)}
    report_path = out_file.with_suffix(out_file.suffix + ".mad.json")
    report_path.write_text(json.dumps(mad_report, indent=2, sort_keys=True) + "\n")
    _manifest(
        "generate", out_file,
        seeds=[seed], inputs=[str(ckpt), str(conditions)],
        outputs=[str(out_file), str(report_path)],
        vocab_hash=vocab.content_hash(),
        checkpoint_hashes={Path(ckpt).name: checkpoint_hash(ckpt)},
        n=n_samples, temperature=temperature,
    )
    click.echo(json.dumps(mad_report, sort_keys=True))


@main.command("benchmark")
@click.option("--generated", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--reference", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), required=True)
def cmd_benchmark(generated, reference, out_file) -> None:
    """GenerationReport (validity/uniqueness/novelty/IntDiv/KLSim) for a
    generated set against a reference corpus."""
    gen_lines = [s for s, _ in _load_lines(generated)]
    ref_lines = [s for s, _ in _load_lines(reference)]
    if not gen_lines or not ref_lines:
        click.echo("empty generated or reference file", err=True)
        sys.exit(EXIT_DATA)
    ref_canon = set()
    ref_graphs = []
    for s in ref_lines:
        try:
            g = parse_smiles(s)
            ref_canon.add(canonical_smiles(g))
            ref_graphs.append(g)
        except (ParseError, KekulizeError):
            continue
    if not ref_graphs:
        click.echo("no parseable reference molecules", err=True)
        sys.exit(EXIT_DATA)
    report = generation_metrics(
        gen_lines, ref_canon, ref_descriptors=descriptor_table(ref_graphs)
    )
    out_file.write_text(report.to_json() + "\n")
    _manifest(
        "benchmark", out_file,
        inputs=[str(generated), str(reference)], outputs=[str(out_file)],
        n_generated=report.n_generated, validity=report.validity,
    )
    click.echo(report.to_json())


if __name__ == "__main__":
    main()
