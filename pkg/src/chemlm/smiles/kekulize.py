"""Kekulization and aromaticity perception.

Kekulization turns every aromatic bond into a single/double assignment by
perfect matching over the atoms that still need one double bond (pyrrole-type
lone-pair contributors are excluded from the demand set). The result is then
re-perceived: a ring system that was written aromatic must come back aromatic
under the 4n+2 electron count, otherwise the input claimed an aromaticity
that does not exist (e.g. "c1ccc1") and a KekulizeError is raised.

Aromatization is the inverse normal form: rings (and fused ring unions) of a
kekulized graph whose electron count is 4n+2 are rewritten to aromatic atoms
and bonds, so both spellings of e.g. benzene canonicalize identically.
"""

from __future__ import annotations

from dataclasses import replace

from chemlm import periodic
from chemlm.smiles.graph import Atom, Bond, BondOrder, MolGraph

_MAX_UNION = 6  # largest number of fused SSSR rings combined during perception


class KekulizeError(ValueError):
    pass


def _target_valence(atom: Atom) -> int:
    sym = periodic.symbol(atom.element)
    q = atom.formal_charge
    if sym == "C":
        return 4 - abs(q)
    if sym in ("N", "P", "As"):
        return 3 + q
    if sym in ("O", "S", "Se"):
        return 2 + q
    if sym == "B":
        return 3 - q
    return 0


def _needs_pi_double(g: MolGraph, idx: int) -> bool:
    """Does this aromatic atom require one in-ring double bond?"""
    atom = g.atoms[idx]
    sigma = g.degree(idx) + g.hydrogen_count(idx)
    existing_pi = 0
    for bi in g.adjacency[idx]:
        order = g.bonds[bi].order
        if order is BondOrder.DOUBLE:
            existing_pi += 1
        elif order is BondOrder.TRIPLE:
            existing_pi += 2
    return _target_valence(atom) - sigma - existing_pi >= 1


def kekulize(g: MolGraph) -> MolGraph:
    """Return a copy with all aromatic bonds resolved to single/double and
    aromatic flags cleared. Raises KekulizeError when the written aromatic
    system is inconsistent. Kekulizing a kekulized graph is the identity."""
    aromatic_atoms = [i for i, a in enumerate(g.atoms) if a.aromatic]
    if not aromatic_atoms and not any(
        b.order is BondOrder.AROMATIC for b in g.bonds
    ):
        return g

    hcounts = [g.hydrogen_count(i) for i in range(len(g.atoms))]
    ring_bond_keys = g.rings.ring_bonds

    for i in aromatic_atoms:
        if not g.in_ring(i):
            raise KekulizeError(f"aromatic atom {i} is not in a ring")
    for b in g.bonds:
        if b.order is BondOrder.AROMATIC and b.key not in ring_bond_keys:
            raise KekulizeError(
                f"aromatic bond between atoms {b.a} and {b.b} is not in a ring"
            )

    demand = {i for i in aromatic_atoms if _needs_pi_double(g, i)}
    partner_edges: dict[int, list[tuple[int, int]]] = {i: [] for i in demand}
    for bi, b in enumerate(g.bonds):
        if b.order is BondOrder.AROMATIC and b.a in demand and b.b in demand:
            partner_edges[b.a].append((b.b, bi))
            partner_edges[b.b].append((b.a, bi))

    # Order the search by structural ranks, not input order: every spelling
    # of one molecule then resolves to the same abstract Kekule assignment,
    # which keeps enumeration/canonicalization closed.
    from chemlm.smiles.canon import invariant_ranks

    rank = invariant_ranks(g)
    for i in partner_edges:
        partner_edges[i].sort(key=lambda e: (rank[e[0]], e[0]))
    matching = _perfect_matching(demand, partner_edges, rank)
    if matching is None:
        raise KekulizeError(
            "no alternating single/double assignment exists for the aromatic system"
        )

    new_bonds = []
    for bi, b in enumerate(g.bonds):
        if b.order is BondOrder.AROMATIC:
            order = BondOrder.DOUBLE if bi in matching else BondOrder.SINGLE
            new_bonds.append(Bond(b.a, b.b, order))
        else:
            new_bonds.append(b)
    new_atoms = [
        replace(a, aromatic=False) if a.aromatic else a for a in g.atoms
    ]
    kek = MolGraph(new_atoms, new_bonds)
    kek.set_hydrogen_counts(hcounts)

    perceived = _perceive_aromatic_atoms(kek)
    missing = [i for i in aromatic_atoms if i not in perceived]
    if missing:
        raise KekulizeError(
            f"ring written as aromatic fails the 4n+2 electron count (atoms {missing})"
        )
    return kek


def _perfect_matching(
    demand: set[int], edges: dict[int, list[tuple[int, int]]], rank: list[int]
) -> set[int] | None:
    """Backtracking perfect matching over the demand set; returns the matched
    bond indices, or None. Most-constrained atom first (rank-tie-broken)
    keeps this fast and input-order independent on molecular graphs."""
    matched: dict[int, int] = {}
    used_bonds: set[int] = set()

    def free_degree(i: int) -> int:
        return sum(1 for nbr, _ in edges[i] if nbr not in matched)

    def solve() -> bool:
        unmatched = [i for i in demand if i not in matched]
        if not unmatched:
            return True
        pivot = min(unmatched, key=lambda i: (free_degree(i), rank[i], i))
        options = [(nbr, bi) for nbr, bi in edges[pivot] if nbr not in matched]
        if not options:
            return False
        for nbr, bi in options:
            matched[pivot] = nbr
            matched[nbr] = pivot
            used_bonds.add(bi)
            if solve():
                return True
            used_bonds.discard(bi)
            del matched[pivot]
            del matched[nbr]
        return False

    if solve():
        return used_bonds
    return None


# -- aromaticity perception ----------------------------------------------


def _contribution(g: MolGraph, idx: int, member: frozenset[int]) -> int | None:
    """Pi electrons atom `idx` contributes to the candidate ring system
    `member`, or None when the atom cannot be part of an aromatic system."""
    atom = g.atoms[idx]
    if atom.element not in periodic.AROMATIC_CAPABLE:
        return None
    double_partners = []
    for bi in g.adjacency[idx]:
        b = g.bonds[bi]
        if b.order is BondOrder.TRIPLE or b.order is BondOrder.AROMATIC:
            return None
        if b.order is BondOrder.DOUBLE:
            double_partners.append(b.other(idx))
    if double_partners:
        return 1 if any(p in member for p in double_partners) else 0

    sym = periodic.symbol(atom.element)
    q = atom.formal_charge
    if sym == "C":
        if q < 0:
            return 2
        if q > 0:
            return 0
        return None  # saturated carbon blocks aromaticity
    if sym == "B":
        return 2 if q < 0 else 0
    # N/P/As and O/S/Se: a lone pair is available unless the atom is a
    # cation, in which case it would have needed the double bond it lacks.
    if q > 0:
        return None
    return 2


def _perceive_aromatic_atoms(g: MolGraph) -> set[int]:
    """Atoms belonging to some 4n+2 ring or fused-ring union of a kekulized
    graph."""
    sssr = g.rings.rings
    candidates: list[frozenset[int]] = []
    for ring in sssr:
        member = frozenset(ring)
        if all(_contribution(g, i, member) is not None for i in ring):
            candidates.append(member)
    if not candidates:
        return set()

    aromatic: set[int] = set()

    def huckel(member: frozenset[int]) -> bool:
        total = 0
        for i in member:
            c = _contribution(g, i, member)
            if c is None:
                return False
            total += c
        return total % 4 == 2

    for member in candidates:
        if huckel(member):
            aromatic |= member

    # fuse neighbouring candidate rings (sharing at least one bond) and
    # retest unions; covers systems like naphthalene/indole/azulene where a
    # single SSSR ring lacks its double bonds.
    fused: list[list[int]] = [[] for _ in candidates]
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            if len(candidates[i] & candidates[j]) >= 2:
                fused[i].append(j)
                fused[j].append(i)

    frontier = [frozenset([i]) for i in range(len(candidates))]
    seen: set[frozenset[int]] = set(frontier)
    for _ in range(_MAX_UNION - 1):
        nxt = []
        for group in frontier:
            for i in group:
                for j in fused[i]:
                    bigger = group | {j}
                    if bigger in seen:
                        continue
                    seen.add(bigger)
                    nxt.append(bigger)
                    member = frozenset().union(*(candidates[k] for k in bigger))
                    if huckel(member):
                        aromatic |= member
        if not nxt or len(seen) > 512:
            break
        frontier = nxt
    return aromatic


def aromatize(g: MolGraph) -> MolGraph:
    """Rewrite 4n+2 rings of a kekulized graph to aromatic form. Atoms keep
    their hydrogen counts; in-ring double bonds inside perceived systems
    become aromatic bonds."""
    if any(b.order is BondOrder.AROMATIC for b in g.bonds):
        raise ValueError("aromatize expects a kekulized graph")
    aromatic_atoms = _perceive_aromatic_atoms(g)
    if not aromatic_atoms:
        return g

    hcounts = [g.hydrogen_count(i) for i in range(len(g.atoms))]
    aromatic_bond_keys: set[tuple[int, int]] = set()
    for ring in g.rings.rings:
        if not set(ring) <= aromatic_atoms:
            continue
        member = frozenset(ring)
        if not all(_contribution(g, i, member) is not None for i in ring):
            continue
        for i, a in enumerate(ring):
            b = ring[(i + 1) % len(ring)]
            bond = g.bond_between(a, b)
            assert bond is not None
            aromatic_bond_keys.add(bond.key)

    new_atoms = [
        replace(a, aromatic=True) if i in aromatic_atoms and not a.aromatic else a
        for i, a in enumerate(g.atoms)
    ]
    new_bonds = [
        Bond(b.a, b.b, BondOrder.AROMATIC) if b.key in aromatic_bond_keys else b
        for b in g.bonds
    ]
    out = MolGraph(new_atoms, new_bonds)
    out.set_hydrogen_counts(hcounts)
    return out


def normalize(g: MolGraph) -> MolGraph:
    """Kekulize then re-perceive: the aromatic normal form used by
    canonicalization and fingerprints."""
    return aromatize(kekulize(g))
