"""Ring perception: smallest set of smallest rings and bridge detection.

SSSR is computed per connected component with Horton's construction:
candidate cycles are gathered from BFS shortest-path trees, sorted by size,
and accepted greedily when linearly independent over GF(2) (bond-incidence
bitmasks), until the cyclomatic count |E| - |V| + 1 is reached.
"""

from __future__ import annotations

from collections import deque

from chemlm.smiles.graph import BondOrder, MolGraph, RingInfo


def perceive_rings(g: MolGraph) -> RingInfo:
    rings: list[list[int]] = []
    for comp in g.components():
        rings.extend(_component_sssr(g, comp))
    rings.sort(key=lambda r: (len(r), r))

    membership = [0] * len(g.atoms)
    ring_bonds: set[tuple[int, int]] = set()
    aromatic_flags: list[bool] = []
    for ring in rings:
        arom = True
        for i, a in enumerate(ring):
            membership[a] += 1
            b = ring[(i + 1) % len(ring)]
            bond = g.bond_between(a, b)
            assert bond is not None
            ring_bonds.add(bond.key)
            if bond.order is not BondOrder.AROMATIC:
                arom = False
        aromatic_flags.append(arom)
    return RingInfo(rings, membership, aromatic_flags, frozenset(ring_bonds))


def _component_sssr(g: MolGraph, comp: list[int]) -> list[list[int]]:
    edges = sorted(
        {g.bonds[bi].key for a in comp for bi in g.adjacency[a]}
    )
    target = len(edges) - len(comp) + 1
    if target <= 0:
        return []
    edge_bit = {e: i for i, e in enumerate(edges)}

    candidates: list[tuple[int, int, list[int]]] = []  # (size, mask, cycle)
    seen_masks: set[int] = set()
    for root in comp:
        parent, dist = _bfs(g, root)
        for (x, y) in edges:
            if dist.get(x) is None or dist.get(y) is None:
                continue
            px, py = _path(parent, x), _path(parent, y)
            # paths must meet only at the root for a simple candidate cycle
            if set(px[1:]) & set(py[1:]):
                continue
            if parent.get(x) == y or parent.get(y) == x:
                continue  # tree edge, no cycle
            cycle = px[::-1] + py[1:]  # root..x + y..(skip root, reversed below)
            cycle = list(reversed(px)) + py[1:]
            if len(set(cycle)) != len(cycle):
                continue
            mask = _cycle_mask(g, cycle, edge_bit)
            if mask is None or mask in seen_masks:
                continue
            seen_masks.add(mask)
            candidates.append((len(cycle), mask, cycle))

    candidates.sort(key=lambda c: (c[0], c[2]))
    basis: list[int] = []  # row-reduced masks
    out: list[list[int]] = []
    for _, mask, cycle in candidates:
        reduced = mask
        for row in basis:
            reduced = min(reduced, reduced ^ row)
        if reduced:
            basis.append(reduced)
            basis.sort(reverse=True)
            out.append(_rotate_cycle(cycle))
            if len(out) == target:
                break
    if len(out) != target:
        raise RuntimeError(
            f"SSSR search found {len(out)} of {target} independent cycles"
        )
    return out


def _bfs(g: MolGraph, root: int) -> tuple[dict[int, int | None], dict[int, int]]:
    parent: dict[int, int | None] = {root: None}
    dist = {root: 0}
    queue = deque([root])
    while queue:
        cur = queue.popleft()
        for nbr in sorted(g.neighbors(cur)):
            if nbr not in dist:
                dist[nbr] = dist[cur] + 1
                parent[nbr] = cur
                queue.append(nbr)
    return parent, dist


def _path(parent: dict[int, int | None], node: int) -> list[int]:
    path = [node]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])  # type: ignore[arg-type]
    return path[::-1]  # root .. node


def _cycle_mask(g: MolGraph, cycle: list[int], edge_bit: dict) -> int | None:
    mask = 0
    for i, a in enumerate(cycle):
        b = cycle[(i + 1) % len(cycle)]
        bond = g.bond_between(a, b)
        if bond is None:
            return None
        mask |= 1 << edge_bit[bond.key]
    return mask


def _rotate_cycle(cycle: list[int]) -> list[int]:
    """Canonical rotation: start at the smallest atom, step toward the
    smaller neighbor, so a fixed graph always reports identical rings."""
    k = cycle.index(min(cycle))
    rot = cycle[k:] + cycle[:k]
    if rot[1] > rot[-1]:
        rot = [rot[0]] + rot[:0:-1]
    return rot


def bridges(g: MolGraph) -> set[tuple[int, int]]:
    """Bond keys not lying on any cycle (standard low-link computation,
    iterative to keep deep chain molecules off the Python stack)."""
    n = len(g.atoms)
    visited = [False] * n
    tin = [0] * n
    low = [0] * n
    timer = 0
    out: set[tuple[int, int]] = set()
    for start in range(n):
        if visited[start]:
            continue
        stack: list[tuple[int, int, int]] = [(start, -1, 0)]  # node, parent-bond, edge-pos
        while stack:
            node, pbond, pos = stack.pop()
            if pos == 0:
                visited[node] = True
                tin[node] = low[node] = timer
                timer += 1
            bonds = g.adjacency[node]
            if pos < len(bonds):
                stack.append((node, pbond, pos + 1))
                bi = bonds[pos]
                if bi == pbond:
                    continue
                nbr = g.bonds[bi].other(node)
                if visited[nbr]:
                    low[node] = min(low[node], tin[nbr])
                else:
                    stack.append((nbr, bi, 0))
            elif pbond >= 0:
                bond = g.bonds[pbond]
                par = bond.other(node)
                low[par] = min(low[par], low[node])
                if low[node] > tin[par]:
                    out.add(bond.key)
    return out
