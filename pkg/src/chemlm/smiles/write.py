"""Graph-to-SMILES serialization with controllable root and traversal order.

Deterministic mode visits neighbours by canonical rank; random mode shuffles
neighbour order and component order with a seeded generator. Output reparses
to an attribute-preserving isomorphic graph.
"""

from __future__ import annotations

import numpy as np

from chemlm import periodic
from chemlm.smiles.graph import Atom, BondOrder, MolGraph, _bare_aromatic_h
from chemlm.smiles.rings import bridges


def serialize(
    g: MolGraph,
    root: int | None = None,
    order: str = "deterministic",
    seed: int | None = None,
    ranks: list[int] | None = None,
) -> str:
    """Serialize `g` to SMILES. `root` picks the first atom of its component;
    other components follow after '.'. With order="random", neighbour visit
    order, remaining roots and component order are drawn from `seed`."""
    if not g.atoms:
        raise ValueError("cannot serialize an empty graph")
    if root is not None and not 0 <= root < len(g.atoms):
        raise IndexError(f"root atom {root} out of range")
    if order not in ("deterministic", "random"):
        raise ValueError(f"unknown order {order!r}")

    bridge_keys = bridges(g)
    comps = g.components()

    if order == "deterministic":
        if ranks is None:
            from chemlm.smiles.canon import canonical_ranks

            ranks = canonical_ranks(g)
        rk = ranks
        if root is None:
            root = rk.index(min(rk))

        def neighbor_key(bond_idx: int, frm: int) -> tuple:
            return (rk[g.bonds[bond_idx].other(frm)],)

        lead = next(c for c in comps if root in c)
        out = [_write_component(g, root, neighbor_key, bridge_keys)]
        out.extend(
            sorted(
                _write_component(g, min(c, key=lambda i: rk[i]), neighbor_key, bridge_keys)
                for c in comps
                if c is not lead
            )
        )
        return ".".join(out)

    rng = np.random.default_rng(seed)
    priority = rng.permutation(len(g.bonds))

    def neighbor_key(bond_idx: int, frm: int) -> tuple:
        return (priority[bond_idx],)

    lead_piece: str | None = None
    pieces: list[str] = []
    for c in comps:
        if root is not None and root in c:
            lead_piece = _write_component(g, root, neighbor_key, bridge_keys)
        else:
            comp_root = c[int(rng.integers(len(c)))]
            pieces.append(_write_component(g, comp_root, neighbor_key, bridge_keys))
    rng.shuffle(pieces)
    if lead_piece is not None:
        pieces.insert(0, lead_piece)
    return ".".join(pieces)


def _write_component(g, root, neighbor_key, bridge_keys) -> str:
    # pass 1: fix traversal, classify tree vs ring-closure edges
    visited = {root}
    children: dict[int, list[tuple[int, int]]] = {root: []}  # atom -> [(bond, child)]
    closures_at: dict[int, list[int]] = {}  # atom -> bond indices anchored here
    closure_order: list[int] = []
    seen_bonds: set[int] = set()
    visit_seq = [root]

    stack: list[tuple[int, list[int], int]] = [
        (root, sorted(g.adjacency[root], key=lambda bi: neighbor_key(bi, root)), 0)
    ]
    while stack:
        atom, bonds, pos = stack.pop()
        if pos < len(bonds):
            stack.append((atom, bonds, pos + 1))
            bi = bonds[pos]
            if bi in seen_bonds:
                continue
            nbr = g.bonds[bi].other(atom)
            if nbr not in visited:
                seen_bonds.add(bi)
                visited.add(nbr)
                visit_seq.append(nbr)
                children.setdefault(atom, []).append((bi, nbr))
                children.setdefault(nbr, [])
                stack.append(
                    (nbr, sorted(g.adjacency[nbr], key=lambda bj: neighbor_key(bj, nbr)), 0)
                )
            else:
                seen_bonds.add(bi)
                closures_at.setdefault(atom, []).append(bi)
                closures_at.setdefault(nbr, []).append(bi)
                closure_order.append(bi)

    # pass 2: assign ring-closure digits in writing order and emit
    digit_of: dict[int, int] = {}
    free_digits = list(range(99, 0, -1))
    opened: set[int] = set()

    def digit_token(bi: int) -> str:
        d = digit_of[bi]
        return str(d) if d < 10 else f"%{d:02d}"

    out: list[str] = []

    def emit(atom: int) -> None:
        out.append(_atom_token(g, atom))
        for bi in sorted(
            closures_at.get(atom, []), key=lambda b: neighbor_key(b, atom)
        ):
            if bi not in opened:
                opened.add(bi)
                digit_of[bi] = free_digits.pop()
            else:
                free_digits.append(digit_of[bi])
                free_digits.sort(reverse=True)
            out.append(_bond_token(g, bi, bridge_keys) + digit_token(bi))
        kids = children.get(atom, [])
        for k, (bi, child) in enumerate(kids):
            last = k == len(kids) - 1
            bond_str = _bond_token(g, bi, bridge_keys)
            if not last:
                out.append("(")
            out.append(bond_str)
            emit(child)
            if not last:
                out.append(")")

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * len(g.atoms) + 100))
    try:
        emit(root)
    finally:
        sys.setrecursionlimit(old_limit)
    return "".join(out)


def _bond_token(g, bond_idx: int, bridge_keys) -> str:
    bond = g.bonds[bond_idx]
    order = bond.order
    both_aromatic = g.atoms[bond.a].aromatic and g.atoms[bond.b].aromatic
    if order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if order is BondOrder.DOUBLE:
        return "="
    if order is BondOrder.TRIPLE:
        return "#"
    # aromatic bonds default between aromatic atoms inside rings; a written
    # ':' is only needed when reparsing would default to single (bridges)
    return ":" if bond.key in bridge_keys else ""


def _atom_token(g: MolGraph, idx: int) -> str:
    atom = g.atoms[idx]
    h = g.hydrogen_count(idx)
    if _bare_ok(g, idx, atom, h):
        return atom.symbol.lower() if atom.aromatic else atom.symbol

    sym = atom.symbol.lower() if atom.aromatic else atom.symbol
    parts = ["["]
    if atom.isotope is not None:
        parts.append(str(atom.isotope))
    parts.append(sym)
    if atom.chirality is not None:
        parts.append(atom.chirality)
    if h == 1:
        parts.append("H")
    elif h > 1:
        parts.append(f"H{h}")
    q = atom.formal_charge
    if q == 1:
        parts.append("+")
    elif q == -1:
        parts.append("-")
    elif q > 1:
        parts.append(f"+{q}")
    elif q < -1:
        parts.append(f"-{-q}")
    if atom.atom_map is not None:
        parts.append(f":{atom.atom_map}")
    parts.append("]")
    return "".join(parts)


def _bare_ok(g: MolGraph, idx: int, atom: Atom, h: int) -> bool:
    if (
        atom.formal_charge != 0
        or atom.isotope is not None
        or atom.atom_map is not None
        or atom.chirality is not None
    ):
        return False
    if atom.aromatic:
        if atom.element not in periodic.ORGANIC_AROMATIC:
            return False
        return h == _bare_aromatic_h(atom.element, g.degree(idx))
    if atom.element not in periodic.ORGANIC_SUBSET:
        return False
    total = 0
    for bi in g.adjacency[idx]:
        order = g.bonds[bi].order
        if order is BondOrder.AROMATIC:
            return False
        total += int(order)
    implied = 0
    for valence in periodic.DEFAULT_VALENCES[atom.element]:
        if valence >= total:
            implied = valence - total
            break
    return h == implied
