"""Native physicochemical descriptors.

These back the distribution-similarity metric. Empirically parameterized
descriptors from third-party toolkits (logP, TPSA, BertzCT) are replaced by
documented native analogues; GraphComplexity is the molecular-complexity
substitute: sum over atoms of degree*log2(degree+1), plus the bond count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from chemlm import periodic
from chemlm.smiles.graph import BondOrder, MolGraph
from chemlm.smiles.kekulize import KekulizeError, normalize

_N = periodic.ATOMIC_NUMBER["N"]
_O = periodic.ATOMIC_NUMBER["O"]
_C = periodic.ATOMIC_NUMBER["C"]


@dataclass(frozen=True)
class DescriptorVector:
    MolWt: float
    NumHAcceptors: int
    NumHDonors: int
    NumRotatableBonds: int
    NumAliphaticRings: int
    NumAromaticRings: int
    HeavyAtomCount: int
    RingAtomFraction: float
    GraphComplexity: float

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DESCRIPTOR_NAMES = tuple(f.name for f in fields(DescriptorVector))

# binning treatment for the distribution-similarity metric
CONTINUOUS_DESCRIPTORS = frozenset({"MolWt", "RingAtomFraction", "GraphComplexity"})
INTEGER_DESCRIPTORS = frozenset(DESCRIPTOR_NAMES) - CONTINUOUS_DESCRIPTORS


def descriptors(g: MolGraph) -> DescriptorVector:
    try:
        g = normalize(g)
    except KekulizeError:
        pass

    mol_wt = 0.0
    hba = 0
    hbd = 0
    for i, atom in enumerate(g.atoms):
        h = g.hydrogen_count(i)
        base = float(atom.isotope) if atom.isotope is not None else periodic.mass(atom.element)
        mol_wt += base + h * periodic.HYDROGEN_MASS
        if atom.element in (_N, _O):
            if atom.formal_charge <= 0:
                hba += 1
            if h >= 1:
                hbd += 1

    rotatable = 0
    for bond in g.bonds:
        if bond.order is not BondOrder.SINGLE:
            continue
        if g.bond_in_ring(bond):
            continue
        if g.degree(bond.a) < 2 or g.degree(bond.b) < 2:
            continue
        if _is_amide_cn(g, bond.a, bond.b) or _is_amide_cn(g, bond.b, bond.a):
            continue
        rotatable += 1

    ring_info = g.rings
    n_aromatic = sum(ring_info.aromatic)
    n_aliphatic = len(ring_info.rings) - n_aromatic
    heavy = sum(1 for a in g.atoms if a.element > 1)
    ring_atoms = sum(1 for i in range(len(g.atoms)) if ring_info.membership[i] > 0)

    complexity = float(len(g.bonds))
    for i in range(len(g.atoms)):
        d = g.degree(i)
        complexity += d * math.log2(d + 1)

    return DescriptorVector(
        MolWt=mol_wt,
        NumHAcceptors=hba,
        NumHDonors=hbd,
        NumRotatableBonds=rotatable,
        NumAliphaticRings=n_aliphatic,
        NumAromaticRings=n_aromatic,
        HeavyAtomCount=heavy,
        RingAtomFraction=ring_atoms / heavy if heavy else 0.0,
        GraphComplexity=complexity,
    )


def _is_amide_cn(g: MolGraph, c: int, n: int) -> bool:
    if g.atoms[c].element != _C or g.atoms[n].element != _N:
        return False
    for bi in g.adjacency[c]:
        b = g.bonds[bi]
        if b.order is BondOrder.DOUBLE and g.atoms[b.other(c)].element == _O:
            return True
    return False


def descriptor_table(graphs: list[MolGraph]) -> dict[str, list[float]]:
    """Column-oriented descriptor values for a molecule set."""
    cols: dict[str, list[float]] = {name: [] for name in DESCRIPTOR_NAMES}
    for g in graphs:
        vec = descriptors(g).to_dict()
        for name in DESCRIPTOR_NAMES:
            cols[name].append(float(vec[name]))
    return cols
