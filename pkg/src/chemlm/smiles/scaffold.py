"""Murcko scaffold: ring systems plus the linkers between them.

Side chains are stripped by repeatedly deleting non-ring atoms that reach
degree <= 1; atoms double- or triple-bonded directly to a surviving atom are
then restored (keeps exocyclic carbonyls on rings and linkers alike).
Acyclic molecules have an empty scaffold.
"""

from __future__ import annotations

from chemlm.smiles.graph import BondOrder, MolGraph


def murcko_scaffold(g: MolGraph) -> MolGraph:
    if not g.rings.rings:
        return MolGraph([], [])

    in_ring = [g.rings.membership[i] > 0 for i in range(len(g.atoms))]
    keep = set(range(len(g.atoms)))
    changed = True
    while changed:
        changed = False
        for i in sorted(keep):
            if in_ring[i]:
                continue
            degree = sum(
                1 for bi in g.adjacency[i] if g.bonds[bi].other(i) in keep
            )
            if degree <= 1:
                keep.discard(i)
                changed = True

    # restore terminal atoms multiply bonded to the surviving skeleton
    restored: set[int] = set()
    restored_bonds: set[tuple[int, int]] = set()
    for bond in g.bonds:
        if bond.order not in (BondOrder.DOUBLE, BondOrder.TRIPLE):
            continue
        a_in, b_in = bond.a in keep, bond.b in keep
        if a_in != b_in:
            outside = bond.b if a_in else bond.a
            restored.add(outside)
            restored_bonds.add(bond.key)

    final = sorted(keep | restored)
    final_set = set(final)

    # atoms that lost substituents get the bond order back as hydrogens
    # (keeps e.g. the scaffold of N-methylpyrrole kekulizable as 1H-pyrrole)
    h_over: dict[int, int] = {}
    for bond in g.bonds:
        for inside, other in ((bond.a, bond.b), (bond.b, bond.a)):
            if inside in final_set and other not in final_set:
                h_over[inside] = (
                    h_over.get(inside, g.hydrogen_count(inside))
                    + bond.order.value_sum
                )

    # A restored atom can only ever hold its one multiple bond into the
    # skeleton (anything with two surviving neighbours would never have been
    # stripped), so the induced subgraph is exactly the scaffold.
    return g.subgraph(final, h_over)
