import numpy as np
import pytest

from chemlm.augment import (
    CondNormalizer,
    Condition,
    ConditionSpec,
    ReactionRecord,
    UnmappedRoot,
    augment_reactions,
    build_prompt,
    enumerate_smiles,
    read_conditions_csv,
    read_reactions,
    read_smi,
    root_align,
    sample_condition_subset,
)
from chemlm.smiles import canonical_smiles, parse_smiles
from chemlm.tokenizer import build_base_vocab, extend_with_task_tokens

ESTER = "[CH3:1][C:2](=[O:3])[OH:4].[OH:5][CH3:6]>>[CH3:1][C:2](=[O:3])[O:5][CH3:6]"


@pytest.fixture()
def task_vocab(vocab):
    return extend_with_task_tokens(
        vocab, ["<logP>", "<isRing>", "<scaffold>", "<val>", "<sep>", "<C0>", "<C1>"]
    )


def test_enumeration_closure():
    outs = enumerate_smiles("CCO", 10, seed=1)
    assert len(outs) == 10
    want = canonical_smiles("CCO")
    assert all(canonical_smiles(o) == want for o in outs)


def test_enumeration_single_atom():
    assert enumerate_smiles("C", 5, seed=0) == ["C"] * 5


def test_enumeration_multiplies_corpus(small_corpus):
    lines = [s for s in small_corpus[:10]]
    out = [e for s in lines for e in enumerate_smiles(s, 10, seed=3)]
    assert len(out) == 10 * len(lines)


def test_enumeration_rejects_invalid():
    with pytest.raises(ValueError):
        enumerate_smiles("C(=O)(=O)(=O)O", 3)


def test_root_align_shared_root():
    rec = ReactionRecord.from_line(ESTER)
    inp, out = root_align(rec, 0)
    # both sides start with the mapped methyl
    assert inp.startswith("[CH3:1]")
    assert out.startswith("[CH3:1]")


def test_root_align_identity_reaction():
    rec = ReactionRecord.from_line("[CH3:1][OH:2]>>[CH3:1][OH:2]")
    inp, out = root_align(rec, 0)
    assert inp == out


def test_root_align_direction():
    retro = ReactionRecord.from_line(ESTER, direction="retro")
    fwd = ReactionRecord.from_line(ESTER, direction="forward")
    r_in, r_out = root_align(retro, 0)
    f_in, f_out = root_align(fwd, 0)
    assert r_in == f_out and r_out == f_in


def test_root_align_unmapped():
    rec = ReactionRecord(parse_smiles("CC"), parse_smiles("CC"))
    with pytest.raises(UnmappedRoot):
        root_align(rec, 0)


def test_duplicate_product_maps_rejected():
    with pytest.raises(ValueError):
        ReactionRecord.from_line("[CH3:1][CH3:1]>>[CH3:1][CH3:1]")


def test_orphan_product_map_rejected():
    with pytest.raises(ValueError):
        ReactionRecord.from_line("[CH3:1]O>>[CH3:1][OH:9]")


def test_augment_counts():
    rec = ReactionRecord.from_line(ESTER)
    assert len(augment_reactions([rec] * 10, folds=20, seed=0)) == 200
    assert len(augment_reactions([rec], folds=1, seed=0)) == 1


def test_augment_roots_bounded_by_mapped_atoms():
    rec = ReactionRecord.from_line("[CH3:1][CH2:2][OH:3]>>[CH3:1][CH2:2][OH:3]")
    pairs = augment_reactions([rec], folds=5, seed=1)
    assert len(pairs) == 5
    assert len({p[0] for p in pairs}) <= 3


def test_subset_distribution_quick():
    spec = ConditionSpec(
        [Condition(f"<p{i}>", float(i), "continuous") for i in range(4)]
    )
    counts = np.zeros(5)
    n = 50_000
    for s in range(n):
        counts[len(sample_condition_subset(spec, seed=s))] += 1
    freq = counts[1:] / n
    for got, want in zip(freq, (0.1, 0.2, 0.3, 0.4)):
        assert abs(got - want) < 0.01, freq


def test_subset_single_property():
    spec = ConditionSpec([Condition("<p>", 1.0, "continuous")])
    for s in range(20):
        sub = sample_condition_subset(spec, seed=s)
        assert len(sub) == 1


def test_subset_order_randomized():
    spec = ConditionSpec(
        [Condition(f"<p{i}>", float(i), "continuous") for i in range(4)]
    )
    orders = set()
    for s in range(300):
        sub = sample_condition_subset(spec, seed=s)
        if len(sub) == 4:
            orders.add(tuple(c.name for c in sub.conditions))
    assert len(orders) > 12  # far more than one fixed order


def test_subset_empty_spec_rejected():
    with pytest.raises(ValueError):
        sample_condition_subset(ConditionSpec([]), seed=0)


def test_prompt_continuous(task_vocab):
    norm = CondNormalizer.fit({"<logP>": [0.0, 5.0]})
    p = build_prompt(
        ConditionSpec([Condition("<logP>", 2.5, "continuous")]), task_vocab, norm
    )
    names = [task_vocab.tokens[i] for i in p.seq.ids]
    assert names == ["<logP>", "<val>", "<sep>"]
    assert p.slots == [(1, 0.0)]
    assert p.seq.boundary == 3


def test_prompt_class(task_vocab):
    p = build_prompt(ConditionSpec([Condition("<isRing>", 1, "class")]), task_vocab)
    assert [task_vocab.tokens[i] for i in p.seq.ids] == ["<isRing>", "<C1>", "<sep>"]


def test_prompt_scaffold(task_vocab):
    p = build_prompt(
        ConditionSpec([Condition("<scaffold>", "c1ccccc1", "scaffold")]), task_vocab
    )
    assert [task_vocab.tokens[i] for i in p.seq.ids] == [
        "<scaffold>", "c", "1", "c", "c", "c", "c", "c", "1", "<sep>",
    ]


def test_prompt_unregistered_name(task_vocab):
    with pytest.raises(KeyError):
        build_prompt(
            ConditionSpec([Condition("<nope>", 1.0, "continuous")]), task_vocab
        )


def test_read_smi_format():
    text = "# comment\nCCO\tmol-1\n\nCCC\n"
    assert read_smi(text) == [("CCO", "mol-1"), ("CCC", None)]


def test_read_reactions():
    recs = read_reactions(ESTER + "\n# note\n")
    assert len(recs) == 1


def test_read_conditions_csv():
    rows = read_conditions_csv("smiles,MolWt,HeavyAtomCount\nCCO,46.07,\nCCC,,3\n")
    assert rows[0] == ("CCO", {"MolWt": 46.07})
    assert rows[1] == ("CCC", {"HeavyAtomCount": 3.0})
    with pytest.raises(ValueError):
        read_conditions_csv("a,b\n1,2\n")
