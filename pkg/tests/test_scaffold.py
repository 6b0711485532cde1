from chemlm.smiles import canonical_smiles, check_validity, murcko_scaffold, parse_smiles


def scaffold_str(smiles):
    g = murcko_scaffold(parse_smiles(smiles))
    return canonical_smiles(g) if g.atoms else ""


def test_toluene_to_benzene():
    assert scaffold_str("Cc1ccccc1") == canonical_smiles("c1ccccc1")


def test_acyclic_empty():
    assert scaffold_str("CCCC") == ""
    assert scaffold_str("CC(=O)OC") == ""


def test_paper_scaffold_is_its_own_scaffold():
    s = "O=C(Cc1ccccc1)NCc1ccccc1"
    assert scaffold_str(s) == canonical_smiles(s)


def test_all_five_paper_scaffolds_fixpoints():
    scaffolds = [
        "O=C(Cc1ccccc1)NCc1ccccc1",
        "c1cnc2[nH]ccc2c1",
        "c1ccc(-c2ccnnc2)cc1",
        "c1ccc(-n2cnc3ccccc32)cc1",
        "O=C(c1cc[nH]c1)N1CCN(c2ccccc2)CC1",
    ]
    for s in scaffolds:
        assert scaffold_str(s) == canonical_smiles(s), s


def test_exocyclic_double_on_ring_kept():
    assert scaffold_str("O=C1CCCCC1") == canonical_smiles("O=C1CCCCC1")
    # but a side-chain carbonyl goes away with its chain
    assert scaffold_str("CC(=O)Cc1ccccc1") == canonical_smiles("c1ccccc1")


def test_side_chains_stripped_from_linker():
    got = scaffold_str("c1ccccc1C(CCC)c1ccccc1")
    assert got == canonical_smiles("c1ccccc1Cc1ccccc1")


def test_nmethylpyrrole_gains_hydrogen():
    got = scaffold_str("Cn1cccc1")
    assert got == canonical_smiles("c1cc[nH]c1")
    assert check_validity(murcko_scaffold(parse_smiles("Cn1cccc1"))).valid


def test_fixpoint(small_corpus):
    for s in small_corpus:
        g1 = murcko_scaffold(parse_smiles(s))
        g2 = murcko_scaffold(g1)
        if not g1.atoms:
            assert not g2.atoms
        else:
            assert canonical_smiles(g1) == canonical_smiles(g2), s


def test_dangling_single_ring_chain_removed():
    # chain attached to one ring only is a side chain, not a linker
    assert scaffold_str("c1ccccc1CCCC") == canonical_smiles("c1ccccc1")


def test_multi_component_scaffold():
    got = scaffold_str("c1ccccc1.CCCC")
    assert got == canonical_smiles("c1ccccc1")
