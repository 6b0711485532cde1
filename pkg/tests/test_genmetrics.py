import math

import numpy as np
import pytest

from chemlm.metrics import (
    descriptor_table,
    generation_metrics,
    internal_diversity,
    klsim,
    klsim_single,
    mad,
    morgan_fingerprint,
    scaffold_exact_match,
    scaffold_valid,
    tanimoto,
)
from chemlm.smiles import canonical_smiles, parse_smiles


def fps(mols):
    return [morgan_fingerprint(parse_smiles(s)) for s in mols]


def test_intdiv_identical_set_zero():
    f = fps(["CCO"] * 5)
    i1, i2 = internal_diversity(f)
    assert i1 == 0.0 and abs(i2) < 1e-15


def test_intdiv_matches_brute_force(small_corpus):
    f = fps(small_corpus[:20])
    i1, i2 = internal_diversity(f)
    n = len(f)
    s1 = sum(tanimoto(a, b) for a in f for b in f) / n**2
    s2 = sum(tanimoto(a, b) ** 2 for a in f for b in f) / n**2
    assert abs(i1 - (1 - s1)) < 1e-12
    assert abs(i2 - (1 - math.sqrt(s2))) < 1e-12


def test_klsim_self_identity():
    x = np.random.default_rng(0).normal(size=2000)
    assert klsim_single(x, x, "continuous") >= 1 - 1e-9
    k = np.random.default_rng(1).integers(0, 5, 500)
    assert klsim_single(k, k, "integer") >= 1 - 1e-9


def test_klsim_bernoulli_closed_form():
    # KL(Bern(0.5) || Bern(0.9)) = 0.5 ln(25/9); exp(-KL) = 0.600
    rng = np.random.default_rng(2)
    gen = (rng.random(400_000) < 0.5).astype(float)
    ref = (rng.random(400_000) < 0.9).astype(float)
    got = klsim_single(gen, ref, "integer")
    want = math.exp(-0.5 * math.log(25 / 9))
    assert abs(got - want) < 0.01
    assert abs(want - 0.600) < 1e-3


def test_klsim_disjoint_supports_positive():
    got = klsim_single([0.0] * 100, [1.0] * 100, "integer")
    assert 0.0 < got < 0.05


def test_klsim_mean_over_descriptors(small_corpus):
    graphs = [parse_smiles(s) for s in small_corpus[:15]]
    table = descriptor_table(graphs)
    assert klsim(table, table) >= 1 - 1e-9


def test_mad():
    assert mad([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mad([1.0, 2.0], [2.0, 4.0]) == 1.5
    with pytest.raises(ValueError):
        mad([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        mad([], [])


def test_generation_metrics_counts(small_corpus):
    reference = {canonical_smiles(s) for s in small_corpus}
    generated = ["CCO", "OCC", "CCN", "not a molecule", "C(=O)(=O)(=O)O", "CCOCC"]
    rep = generation_metrics(generated, reference)
    assert rep.n_generated == 6
    assert rep.n_valid == 4  # CCO, OCC, CCN, CCOCC
    assert rep.n_unique == 3  # {CCO, CCN, CCOCC}
    assert rep.n_novel == 1  # CCOCC not in the corpus
    assert rep.validity == 4 / 6
    assert rep.uniqueness == 3 / 4
    assert rep.novelty == 1 / 3
    assert rep.n_generated >= rep.n_valid >= rep.n_unique >= rep.n_novel


def test_all_identical_uniqueness():
    rep = generation_metrics(["CCO"] * 8, set())
    assert rep.uniqueness == 1 / 8
    assert rep.intdiv1 == 0.0 and abs(rep.intdiv2) < 1e-15


def test_reference_vs_itself(small_corpus):
    graphs = [parse_smiles(s) for s in small_corpus]
    reference = {canonical_smiles(g) for g in graphs}
    rep = generation_metrics(
        list(small_corpus), reference, ref_descriptors=descriptor_table(graphs)
    )
    assert rep.novelty == 0.0
    assert rep.klsim is not None and rep.klsim >= 1 - 1e-9
    assert rep.validity == 1.0


def test_duplicate_never_increases_uniqueness(small_corpus):
    base = list(small_corpus[:10])
    r1 = generation_metrics(base, set())
    r2 = generation_metrics(base + [base[0]], set())
    assert r2.uniqueness <= r1.uniqueness


def test_report_json_round_trip(small_corpus):
    import json

    rep = generation_metrics(list(small_corpus[:5]), set())
    data = json.loads(rep.to_json())
    assert data["n_generated"] == 5
    assert data["binning"] == {"bins": 100, "epsilon": 1e-10}


def test_scaffold_valid_exact_match():
    target = parse_smiles("c1ccccc1")
    assert scaffold_valid("Cc1ccccc1", target)  # scaffold identical, sim 1
    assert scaffold_exact_match("Cc1ccccc1", target)


def test_scaffold_valid_acyclic_false():
    target = parse_smiles("c1ccccc1")
    assert not scaffold_valid("CCCC", target)
    assert not scaffold_exact_match("CCCC", target)


def test_scaffold_valid_threshold_boundary():
    target = parse_smiles("c1ccccc1")
    g = parse_smiles("Cc1ccccc1")
    sim = tanimoto(
        morgan_fingerprint(parse_smiles("c1ccccc1")), morgan_fingerprint(target)
    )
    assert sim == 1.0
    # exact threshold counts as a pass ("at least 0.8")
    assert scaffold_valid(g, target, threshold=1.0)


def test_scaffold_valid_rejects_invalid_molecule():
    target = parse_smiles("c1ccccc1")
    assert not scaffold_valid("C(=O)(=O)(=O)Oc1ccccc1", target)


def test_empty_generation_rejected():
    with pytest.raises(ValueError):
        generation_metrics([], set())
