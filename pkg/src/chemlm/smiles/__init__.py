"""SMILES engine: parsing, ring perception, kekulization, validity,
serialization, canonicalization and Murcko scaffolds."""

from chemlm.smiles.canon import canonical_ranks, canonical_smiles, invariant_ranks
from chemlm.smiles.graph import Atom, Bond, BondOrder, MolGraph, RingInfo, atom_signature
from chemlm.smiles.kekulize import KekulizeError, aromatize, kekulize, normalize
from chemlm.smiles.parse import ParseError, ParseErrorKind, parse_smiles
from chemlm.smiles.rings import perceive_rings
from chemlm.smiles.scaffold import murcko_scaffold
from chemlm.smiles.validity import ValidityVerdict, allowed_valences, check_validity
from chemlm.smiles.write import serialize

__all__ = [
    "Atom",
    "Bond",
    "BondOrder",
    "KekulizeError",
    "MolGraph",
    "ParseError",
    "ParseErrorKind",
    "RingInfo",
    "ValidityVerdict",
    "allowed_valences",
    "aromatize",
    "atom_signature",
    "canonical_ranks",
    "canonical_smiles",
    "check_validity",
    "invariant_ranks",
    "kekulize",
    "murcko_scaffold",
    "normalize",
    "parse_smiles",
    "perceive_rings",
    "serialize",
]
