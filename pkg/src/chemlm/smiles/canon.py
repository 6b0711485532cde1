"""Canonical atom ranking and canonical SMILES strings.

Ranks start from the invariant tuple (element, degree, charge, H count,
aromatic, ring membership) and are refined by iterated neighbourhood
sorting until stable. Ties are broken by individualizing each tied atom of
the lowest tied class in turn, re-refining, and keeping the branch whose
final serialization is lexicographically smallest; this keeps the result
invariant under relabeling without trusting refinement to separate
everything. A search budget guards against pathological regular graphs;
past it the lowest-index atom is promoted deterministically.
"""

from __future__ import annotations

from chemlm.smiles.graph import BondOrder, MolGraph
from chemlm.smiles.kekulize import normalize
from chemlm.smiles.parse import parse_smiles

_SEARCH_BUDGET = 4096


def _seed_keys(g: MolGraph) -> list[tuple]:
    keys = []
    for i, atom in enumerate(g.atoms):
        keys.append(
            (
                atom.element,
                g.degree(i),
                atom.formal_charge,
                g.hydrogen_count(i),
                atom.aromatic,
                g.rings.membership[i] > 0,
            )
        )
    return keys


def _dense(keys: list) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def refine_partition(g: MolGraph, ranks: list[int]) -> list[int]:
    """Iterated neighbourhood refinement; returns a stable partition that is
    at least as fine as the input."""
    ranks = list(ranks)
    n_classes = len(set(ranks))
    while True:
        keys = []
        for i in range(len(g.atoms)):
            nbrs = sorted(
                (int(g.bonds[bi].order), ranks[g.bonds[bi].other(i)])
                for bi in g.adjacency[i]
            )
            keys.append((ranks[i], tuple(nbrs)))
        ranks = _dense(keys)
        new_classes = len(set(ranks))
        if new_classes == n_classes:
            return ranks
        n_classes = new_classes


def invariant_ranks(g: MolGraph) -> list[int]:
    """Stable refinement ranks without tie-breaking (atoms sharing a rank are
    refinement-indistinguishable)."""
    if not g.atoms:
        return []
    return refine_partition(g, _dense(_seed_keys(g)))


def _promote(ranks: list[int], atom: int) -> list[int]:
    keys = [(r, 0 if i == atom else 1) for i, r in enumerate(ranks)]
    return _dense(keys)


class _Budget(Exception):
    pass


def canonical_ranks(g: MolGraph) -> list[int]:
    """Discrete canonical ranks (a permutation of 0..n-1)."""
    if not g.atoms:
        return []
    ranks = invariant_ranks(g)
    n = len(g.atoms)
    if len(set(ranks)) == n:
        return ranks

    from chemlm.smiles.write import serialize

    best: tuple[str, list[int]] | None = None
    leaves = 0

    def rec(current: list[int]) -> None:
        nonlocal best, leaves
        if len(set(current)) == n:
            leaves += 1
            if leaves > _SEARCH_BUDGET:
                raise _Budget
            root = current.index(0)
            s = serialize(g, root=root, ranks=current)
            if best is None or s < best[0]:
                best = (s, current)
            return
        tied = min(r for r in set(current) if current.count(r) > 1)
        members = [i for i, r in enumerate(current) if r == tied]
        for atom in members:
            rec(refine_partition(g, _promote(current, atom)))

    try:
        rec(ranks)
        assert best is not None
        return best[1]
    except _Budget:
        # deterministic fallback for graphs whose orbit search is too large
        current = ranks
        while len(set(current)) < n:
            tied = min(r for r in set(current) if current.count(r) > 1)
            atom = min(i for i, r in enumerate(current) if r == tied)
            current = refine_partition(g, _promote(current, atom))
        return current


def canonical_smiles(mol: str | MolGraph) -> str:
    """Canonical SMILES of a string or graph: kekulize, re-perceive
    aromaticity, rank, and serialize each component from its rank-minimal
    atom; component strings are sorted. Idempotent."""
    g = parse_smiles(mol) if isinstance(mol, str) else mol
    g = normalize(g)
    comps = g.components()

    from chemlm.smiles.write import serialize

    parts = []
    for comp in comps:
        sub = g.subgraph(comp) if len(comps) > 1 else g
        ranks = canonical_ranks(sub)
        parts.append(serialize(sub, root=ranks.index(0), ranks=ranks))
    return ".".join(sorted(parts))
