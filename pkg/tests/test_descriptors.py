from chemlm.metrics import DESCRIPTOR_NAMES, descriptor_table, descriptors
from chemlm.smiles import parse_smiles


def desc(s):
    return descriptors(parse_smiles(s))


def test_ethanol_hand_computed():
    d = desc("CCO")
    assert abs(d.MolWt - 46.07) < 0.01
    assert d.NumHAcceptors == 1
    assert d.NumHDonors == 1
    assert d.NumRotatableBonds == 0  # terminal bonds excluded
    assert d.HeavyAtomCount == 3
    assert d.RingAtomFraction == 0.0


def test_benzene_rings():
    d = desc("c1ccccc1")
    assert d.NumAromaticRings == 1
    assert d.NumAliphaticRings == 0
    assert d.RingAtomFraction == 1.0


def test_cyclohexane_aliphatic():
    d = desc("C1CCCCC1")
    assert d.NumAliphaticRings == 1
    assert d.NumAromaticRings == 0


def test_kekule_input_perceived():
    assert desc("C1=CC=CC=C1").NumAromaticRings == 1


def test_hba_excludes_cations():
    assert desc("C[N+](C)(C)C").NumHAcceptors == 0
    assert desc("CN(C)C").NumHAcceptors == 1


def test_hbd_needs_hydrogen():
    assert desc("COC").NumHDonors == 0
    assert desc("CO").NumHDonors == 1
    assert desc("CN").NumHDonors == 1


def test_rotatable_bonds():
    # butane: one central rotatable bond
    assert desc("CCCC").NumRotatableBonds == 1
    # ring bonds never rotatable
    assert desc("C1CCCCC1").NumRotatableBonds == 0
    # amide C-N excluded
    assert desc("CC(=O)NC").NumRotatableBonds == 0
    # ester C-O not excluded
    assert desc("CCOC(=O)CC").NumRotatableBonds == 3


def test_molwt_water_and_heavy():
    assert abs(desc("O").MolWt - 18.015) < 0.01
    assert abs(desc("ClC(Cl)Cl").MolWt - 119.37) < 0.05


def test_isotope_mass_used():
    d = desc("[13CH4]")
    assert abs(d.MolWt - (13.0 + 4 * 1.008)) < 1e-6


def test_graph_complexity_monotone_in_branching():
    linear = desc("CCCCC").GraphComplexity
    branched = desc("CC(C)(C)C").GraphComplexity
    assert branched > linear


def test_descriptor_table_columns(small_corpus):
    graphs = [parse_smiles(s) for s in small_corpus[:10]]
    table = descriptor_table(graphs)
    assert set(table) == set(DESCRIPTOR_NAMES)
    assert all(len(col) == 10 for col in table.values())
