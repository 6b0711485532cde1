import math

import pytest
import torch
import torch.nn.functional as F

from chemlm.model import (
    Batch,
    ModelConfig,
    beam_search,
    loss_classification,
    loss_lm_from_logits,
    loss_pretrain,
    loss_regression,
    loss_seq2seq,
    perplexity,
    predict_properties,
    sample_batch,
    sample_conditional,
)
from chemlm.tokenizer import build_base_vocab, extend_with_task_tokens


def rand_batch(vocab_size, eos, b=4, t=12, seed=0, boundaries=None):
    g = torch.Generator().manual_seed(seed)
    toks = torch.randint(0, vocab_size, (b, t), generator=g)
    toks[:, -1] = eos
    return Batch(tokens=toks, lengths=[t] * b, boundaries=boundaries or [])


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(n_layers=1, n_heads=3, n_ctx=8, d_model=16, d_ff=32, vocab_size=10)
    with pytest.raises(ValueError):
        ModelConfig(n_layers=1, n_heads=2, n_ctx=1, d_model=16, d_ff=32, vocab_size=10)


def test_causality_exact(tiny_model_factory, vocab):
    model = tiny_model_factory()
    g = torch.Generator().manual_seed(1)
    ids = torch.randint(0, len(vocab), (1, 12), generator=g)
    base, _ = model(ids)
    for j in range(1, 12):
        mutated = ids.clone()
        mutated[0, j] = (int(ids[0, j]) + 1) % len(vocab)
        out, _ = model(mutated)
        assert torch.equal(base[0, :j], out[0, :j])


def test_single_token_forward(tiny_model_factory):
    model = tiny_model_factory()
    logits, hidden = model(torch.tensor([[3]]))
    assert logits.shape[1] == 1
    assert torch.isfinite(logits).all()


def test_overlong_rejected(tiny_model_factory):
    model = tiny_model_factory(n_ctx=8)
    with pytest.raises(ValueError):
        model(torch.zeros(1, 9, dtype=torch.long))


def test_uniform_init_loss_near_log_vocab(tiny_model_factory, vocab):
    model = tiny_model_factory()
    batch = rand_batch(len(vocab), vocab.eos_id, b=16, t=24)
    loss = float(loss_pretrain(model, batch, vocab.pad_id))
    assert abs(loss - math.log(len(vocab))) / math.log(len(vocab)) < 0.05
    assert abs(perplexity(loss) - math.exp(loss)) < 1e-9


def test_slot_substitution_changes_only_after_slot(tiny_model_factory, vocab):
    model = tiny_model_factory()
    model.attach_value_proj()
    model = model.double()
    ids = torch.randint(0, len(vocab), (1, 10))
    l1, _ = model(ids, [[(4, 0.5)]])
    l2, _ = model(ids, [[(4, 2.5)]])
    assert torch.equal(l1[0, :4], l2[0, :4])
    assert not torch.allclose(l1[0, 4:], l2[0, 4:])


def test_prompt_label_perturbation_zero(tiny_model_factory, vocab):
    model = tiny_model_factory()
    batch = rand_batch(len(vocab), vocab.eos_id, boundaries=[5, 5, 5, 5])
    l1 = float(loss_seq2seq(model, batch, vocab.pad_id))
    labels = batch.tokens.clone()
    labels[:, :5] = (labels[:, :5] + 7) % len(vocab)
    batch2 = Batch(
        tokens=batch.tokens, lengths=batch.lengths,
        boundaries=batch.boundaries, labels=labels,
    )
    l2 = float(loss_seq2seq(model, batch2, vocab.pad_id))
    assert l1 == l2


def test_prompt_logit_gradient_exact_zero(tiny_model_factory, vocab):
    model = tiny_model_factory()
    batch = rand_batch(len(vocab), vocab.eos_id, boundaries=[6, 6, 6, 6])
    logits, _ = model(batch.tokens)
    logits.retain_grad()
    loss = loss_lm_from_logits(logits, batch, vocab.pad_id)
    loss.backward()
    # positions 0..boundary-2 predict prompt tokens only: exactly zero grad
    assert torch.all(logits.grad[:, :5] == 0)
    assert torch.any(logits.grad[:, 5] != 0)


def test_boundary_zero_equals_pretrain(tiny_model_factory, vocab):
    model = tiny_model_factory()
    batch = rand_batch(len(vocab), vocab.eos_id)
    lp = float(loss_pretrain(model, batch, vocab.pad_id))
    ls = float(
        loss_seq2seq(
            model,
            Batch(tokens=batch.tokens, lengths=batch.lengths, boundaries=[0] * 4),
            vocab.pad_id,
        )
    )
    assert lp == ls


def test_boundary_at_length_rejected(tiny_model_factory, vocab):
    model = tiny_model_factory()
    batch = rand_batch(len(vocab), vocab.eos_id, boundaries=[12, 12, 12, 12])
    with pytest.raises(ValueError):
        loss_seq2seq(model, batch, vocab.pad_id)


def test_zero_head_predictions(tiny_model_factory, vocab):
    model = tiny_model_factory()
    model.attach_task_head(3)
    model = model.double()
    with torch.no_grad():
        model.task_head.weight.zero_()
    batch = rand_batch(len(vocab), vocab.eos_id)
    preds = predict_properties(model, batch)
    assert torch.all(preds == 0)
    assert torch.all(torch.sigmoid(preds) == 0.5)


def test_regression_exact_fit_zero_loss(tiny_model_factory, vocab):
    model = tiny_model_factory()
    model.attach_task_head(1)
    model = model.double()
    batch = rand_batch(len(vocab), vocab.eos_id, b=1)
    with torch.no_grad():
        y = predict_properties(model, batch)
    loss = loss_regression(model, batch, y)
    assert float(loss) == 0.0


def test_missing_labels_masked(tiny_model_factory, vocab):
    model = tiny_model_factory()
    model.attach_task_head(2)
    model = model.double()
    batch = rand_batch(len(vocab), vocab.eos_id, b=3)
    labels = torch.tensor(
        [[1.0, float("nan")], [0.0, 1.0], [float("nan"), 0.0]], dtype=torch.float64
    )
    loss1 = float(loss_classification(model, batch, labels))
    # changing a masked label changes nothing
    labels2 = labels.clone()
    labels2[0, 1] = 123.0
    labels2[0, 1] = float("nan")
    assert float(loss_classification(model, batch, labels2)) == loss1


def test_head_shape_mismatch(tiny_model_factory, vocab):
    model = tiny_model_factory()
    model.attach_task_head(2)
    model = model.double()
    batch = rand_batch(len(vocab), vocab.eos_id, b=2)
    with pytest.raises(ValueError):
        loss_regression(model, batch, torch.zeros(2, 3, dtype=torch.float64))


def test_sampling_start_token(tiny_model_factory, vocab):
    model = tiny_model_factory(n_layers=1, d_model=16)
    dist = torch.zeros(len(vocab), dtype=torch.float64)
    dist[vocab.id_of["C"]] = 1.0
    outs = sample_batch(model, dist, 16, 1.0, 10, seed=2, vocab=vocab)
    assert all(o.startswith("C") for o in outs)


def test_sampling_greedy_limit(tiny_model_factory, vocab):
    model = tiny_model_factory(n_layers=1, d_model=16)
    dist = torch.zeros(len(vocab), dtype=torch.float64)
    dist[vocab.id_of["C"]] = 1.0
    a = sample_batch(model, dist, 3, 0.0, 10, seed=1, vocab=vocab)
    b = sample_batch(model, dist, 3, 0.0, 10, seed=9, vocab=vocab)
    assert a == b and len(set(a)) == 1


def test_sampling_seed_determinism(tiny_model_factory, vocab):
    model = tiny_model_factory(n_layers=1, d_model=16)
    dist = torch.full((len(vocab),), 1.0 / len(vocab), dtype=torch.float64)
    a = sample_batch(model, dist, 8, 1.0, 12, seed=5, vocab=vocab)
    b = sample_batch(model, dist, 8, 1.0, 12, seed=5, vocab=vocab)
    assert a == b


def test_sample_conditional_prompt_hidden(tiny_model_factory, vocab):
    v2 = extend_with_task_tokens(vocab, ["<p>", "<val>", "<sep>"])
    model = tiny_model_factory(vocab_size=len(v2))
    model.attach_value_proj()
    model = model.double()
    prompt = [v2.id_of["<p>"], v2.id_of["<val>"], v2.id_of["<sep>"]]
    outs = sample_conditional(
        model, prompt, 4, 1.0, 8, seed=3, vocab=v2, slots=[(1, 0.3)]
    )
    assert len(outs) == 4
    for o in outs:
        assert "<sep>" not in o  # prompt tokens are not part of the output


class _HandSetModel:
    """Position and last-token dependent logits; no learned parameters."""

    def __init__(self, vocab_size, seed=0):
        g = torch.Generator().manual_seed(seed)
        self.tables = [
            torch.randn(vocab_size, generator=g, dtype=torch.float64)
            for _ in range(12)
        ]
        self.config = ModelConfig(
            n_layers=1, n_heads=1, n_ctx=64, d_model=8, d_ff=8,
            vocab_size=vocab_size,
        )

    def eval(self):
        pass

    def __call__(self, ids, slots=None):
        b, t = ids.shape
        rows = []
        for i in range(b):
            rows.append(
                torch.stack(
                    [self.tables[k] + 0.31 * float(ids[i, k]) for k in range(t)]
                )
            )
        return torch.stack(rows), None


def _enumerate_paths(model, prompt, vocab_size, eos, max_len):
    finished, unfinished = [], []

    def step_logp(seq):
        ids = torch.tensor([prompt + list(seq)])
        logits, _ = model(ids)
        return F.log_softmax(logits[0, -1].to(torch.float64), dim=-1)

    def rec(seq, score):
        if seq and seq[-1] == eos:
            finished.append((tuple(seq), score))
            return
        if len(seq) == max_len:
            unfinished.append((tuple(seq), score))
            return
        row = step_logp(seq)
        for tok in range(vocab_size):
            rec(seq + [tok], score + float(row[tok]))

    rec([], 0.0)
    finished.sort(key=lambda c: (-c[1], c[0]))
    unfinished.sort(key=lambda c: (-c[1], c[0]))
    return finished, unfinished


def test_beam_matches_enumeration_no_pruning():
    V, EOS, L = 5, 4, 3
    model = _HandSetModel(V, seed=11)
    got = beam_search(model, [0], beam=200, m=12, max_len=L, eos_id=EOS)
    fin, unfin = _enumerate_paths(model, [0], V, EOS, L)
    assert got == (fin + unfin)[:12]


def test_beam_equals_greedy_at_width_one():
    V, EOS, L = 6, 5, 4
    model = _HandSetModel(V, seed=3)
    got = beam_search(model, [1], beam=1, m=1, max_len=L, eos_id=EOS)
    # greedy rollout oracle
    seq, score = [], 0.0
    for _ in range(L):
        ids = torch.tensor([[1] + seq])
        logits, _ = model(ids)
        row = F.log_softmax(logits[0, -1].to(torch.float64), dim=-1)
        tok = int(row.argmax())
        score += float(row[tok])
        seq.append(tok)
        if tok == EOS:
            break
    assert got[0] == (tuple(seq), pytest.approx(score, abs=1e-12))


def test_beam_logprobs_sorted(tiny_model_factory, vocab):
    model = tiny_model_factory(n_layers=1, d_model=16)
    res = beam_search(
        model, [vocab.id_of["C"]], beam=4, m=6, max_len=5, eos_id=vocab.eos_id
    )
    lps = [r[1] for r in res]
    assert all(lps[i] >= lps[i + 1] for i in range(len(lps) - 1))


def test_vocab_resize_preserves_rows(tiny_model_factory, vocab):
    model = tiny_model_factory()
    emb = model.embed.weight.detach().clone()
    head = model.lm_head.weight.detach().clone()
    model.resize_vocab(len(vocab) + 4)
    assert torch.equal(model.embed.weight[: len(vocab)], emb)
    assert torch.equal(model.lm_head.weight[: len(vocab)], head)
    assert model.config.vocab_size == len(vocab) + 4
