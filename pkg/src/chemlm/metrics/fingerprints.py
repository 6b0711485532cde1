"""Circular (Morgan/ECFP-style) fingerprints and Tanimoto similarity.

Atom environments are hashed with splitmix64, a fixed published 64-bit
mixing function, so fingerprints are identical across processes and
platforms. The default radius 2 / 2048 bits corresponds to ECFP4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chemlm.smiles.graph import BondOrder, MolGraph
from chemlm.smiles.kekulize import KekulizeError, normalize

_MASK = (1 << 64) - 1
_SEED = 0x8F1B_BCDC_BF05_7A21


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return (z ^ (z >> 31)) & _MASK


def _hash_ints(values: tuple[int, ...]) -> int:
    h = _SEED
    for v in values:
        h = splitmix64(h ^ (v & _MASK))
    return h


@dataclass(frozen=True)
class Fingerprint:
    bits: int  # bitmask, little-endian bit order
    nbits: int
    radius: int

    def __post_init__(self) -> None:
        if self.nbits <= 0 or self.nbits & (self.nbits - 1):
            raise ValueError("fingerprint length must be a power of two")

    def count(self) -> int:
        return self.bits.bit_count()

    def packed(self) -> np.ndarray:
        """uint64 words for vectorized popcount arithmetic."""
        words = self.nbits // 64
        out = np.zeros(max(words, 1), dtype=np.uint64)
        bits = self.bits
        for w in range(len(out)):
            out[w] = (bits >> (64 * w)) & _MASK
        return out


def morgan_fingerprint(g: MolGraph, radius: int = 2, nbits: int = 2048) -> Fingerprint:
    """Iterative environment hashing; round-0 invariants are (element,
    heavy-neighbour count, hydrogens, charge, ring membership, aromatic).
    The graph is brought to aromatic normal form first so every spelling of
    one molecule maps to the same bits."""
    try:
        g = normalize(g)
    except KekulizeError:
        pass  # fingerprint of an unkekulizable graph is still well-defined

    n = len(g.atoms)
    bits = 0
    if n == 0:
        return Fingerprint(0, nbits, radius)

    hashes = []
    for i, atom in enumerate(g.atoms):
        hashes.append(
            _hash_ints(
                (
                    atom.element,
                    g.degree(i),
                    g.hydrogen_count(i),
                    atom.formal_charge,
                    int(g.rings.membership[i] > 0),
                    int(atom.aromatic),
                )
            )
        )
    for h in hashes:
        bits |= 1 << (h % nbits)

    bond_code = {
        BondOrder.SINGLE: 1,
        BondOrder.DOUBLE: 2,
        BondOrder.TRIPLE: 3,
        BondOrder.AROMATIC: 4,
    }
    for rnd in range(1, radius + 1):
        nxt = []
        for i in range(n):
            env = sorted(
                (bond_code[g.bonds[bi].order], hashes[g.bonds[bi].other(i)])
                for bi in g.adjacency[i]
            )
            flat: list[int] = [rnd, hashes[i]]
            for code, nh in env:
                flat.append(code)
                flat.append(nh)
            nxt.append(_hash_ints(tuple(flat)))
        hashes = nxt
        for h in hashes:
            bits |= 1 << (h % nbits)
    return Fingerprint(bits, nbits, radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a & b| / |a | b|; 1.0 when both are empty."""
    if a.nbits != b.nbits:
        raise ValueError("fingerprint length mismatch")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


def pack_fingerprints(fps: list[Fingerprint]) -> np.ndarray:
    """(n, nbits/64) uint64 matrix for batch similarity computations."""
    if not fps:
        raise ValueError("no fingerprints")
    return np.stack([fp.packed() for fp in fps])


def pairwise_tanimoto_row(packed: np.ndarray, row: int) -> np.ndarray:
    """Tanimoto of `row` against every row (vectorized popcount)."""
    inter = np.bitwise_count(packed & packed[row]).sum(axis=1).astype(np.float64)
    union = np.bitwise_count(packed | packed[row]).sum(axis=1).astype(np.float64)
    out = np.ones(len(packed))
    nz = union > 0
    out[nz] = inter[nz] / union[nz]
    return out
