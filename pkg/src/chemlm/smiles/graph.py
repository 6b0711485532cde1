"""Attributed molecular graph: the structure behind every SMILES string."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

from chemlm import periodic


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def value_sum(self) -> int:
        """Contribution to an atom's valence sum (aromatic is resolved by
        kekulization before any valence arithmetic, so it never reaches here)."""
        if self is BondOrder.AROMATIC:
            raise ValueError("aromatic bond has no integer valence contribution")
        return int(self)


@dataclass(frozen=True)
class Atom:
    """One atom. `explicit_h` is set iff the atom came from (or must be
    written in) bracket notation; bare organic-subset atoms carry None and
    get their hydrogen count from the valence model."""

    element: int
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: int | None = None
    isotope: int | None = None
    atom_map: int | None = None
    chirality: str | None = None  # "@" or "@@", preserved verbatim

    def __post_init__(self) -> None:
        if not 1 <= self.element <= periodic.NUM_ELEMENTS:
            raise ValueError(f"atomic number out of range: {self.element}")
        if self.aromatic and self.element not in periodic.AROMATIC_CAPABLE:
            raise ValueError(
                f"element {periodic.symbol(self.element)} cannot be aromatic"
            )
        if self.explicit_h is not None and self.explicit_h < 0:
            raise ValueError("explicit hydrogen count must be non-negative")
        if self.isotope is not None and self.isotope <= 0:
            raise ValueError("isotope must be positive")
        if self.atom_map is not None and self.atom_map <= 0:
            raise ValueError("atom map must be positive")
        if self.chirality is not None and self.chirality not in ("@", "@@"):
            raise ValueError(f"unsupported chirality tag {self.chirality!r}")

    @property
    def symbol(self) -> str:
        return periodic.symbol(self.element)


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: BondOrder = BondOrder.SINGLE

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError("self-loop bond")

    def other(self, idx: int) -> int:
        if idx == self.a:
            return self.b
        if idx == self.b:
            return self.a
        raise ValueError(f"atom {idx} not in bond")

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass
class RingInfo:
    """Smallest set of smallest rings plus derived per-atom/per-ring facts."""

    rings: list[list[int]]
    membership: list[int]  # per-atom count of SSSR rings containing it
    aromatic: list[bool]  # per-ring: every ring bond aromatic
    ring_bonds: frozenset[tuple[int, int]]  # bond keys appearing in any SSSR ring


class MolGraph:
    """Simple undirected attributed graph; one instance may hold several
    connected components (multi-compound SMILES)."""

    def __init__(self, atoms: list[Atom], bonds: list[Bond]):
        n = len(atoms)
        seen: set[tuple[int, int]] = set()
        for bond in bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise ValueError(f"bond index out of range: {bond}")
            if bond.key in seen:
                raise ValueError(f"parallel bond between {bond.a} and {bond.b}")
            seen.add(bond.key)
        self.atoms = list(atoms)
        self.bonds = list(bonds)
        self._adjacency: list[list[int]] | None = None  # bond indices per atom
        self._rings: RingInfo | None = None
        self._hcounts: list[int] | None = None

    # -- basic structure -------------------------------------------------

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def adjacency(self) -> list[list[int]]:
        if self._adjacency is None:
            adj: list[list[int]] = [[] for _ in self.atoms]
            for i, bond in enumerate(self.bonds):
                adj[bond.a].append(i)
                adj[bond.b].append(i)
            self._adjacency = adj
        return self._adjacency

    def neighbors(self, idx: int) -> list[int]:
        return [self.bonds[bi].other(idx) for bi in self.adjacency[idx]]

    def degree(self, idx: int) -> int:
        return len(self.adjacency[idx])

    def bond_between(self, a: int, b: int) -> Bond | None:
        for bi in self.adjacency[a]:
            if self.bonds[bi].other(a) == b:
                return self.bonds[bi]
        return None

    def components(self) -> list[list[int]]:
        """Connected components as sorted atom-index lists, ordered by their
        smallest member."""
        seen = [False] * len(self.atoms)
        out: list[list[int]] = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                cur = stack.pop()
                comp.append(cur)
                for nbr in self.neighbors(cur):
                    if not seen[nbr]:
                        seen[nbr] = True
                        stack.append(nbr)
            out.append(sorted(comp))
        return out

    # -- rings -----------------------------------------------------------

    @property
    def rings(self) -> RingInfo:
        if self._rings is None:
            from chemlm.smiles.rings import perceive_rings

            self._rings = perceive_rings(self)
        return self._rings

    def in_ring(self, idx: int) -> bool:
        return self.rings.membership[idx] > 0

    def bond_in_ring(self, bond: Bond) -> bool:
        return bond.key in self.rings.ring_bonds

    # -- hydrogens -------------------------------------------------------

    def hydrogen_count(self, idx: int) -> int:
        if self._hcounts is None:
            self._hcounts = [self._implicit_h(i) for i in range(len(self.atoms))]
        return self._hcounts[idx]

    def set_hydrogen_counts(self, counts: list[int]) -> None:
        """Pin hydrogen counts (used when deriving graphs whose bond orders
        changed, e.g. kekulized or re-aromatized copies)."""
        if len(counts) != len(self.atoms):
            raise ValueError("hydrogen count list length mismatch")
        self._hcounts = list(counts)

    def _implicit_h(self, idx: int) -> int:
        atom = self.atoms[idx]
        if atom.explicit_h is not None:
            return atom.explicit_h
        if atom.element not in periodic.ORGANIC_SUBSET:
            return 0
        if atom.aromatic:
            return _bare_aromatic_h(atom.element, self.degree(idx))
        total = 0
        for bi in self.adjacency[idx]:
            order = self.bonds[bi].order
            total += 2 if order is BondOrder.AROMATIC else order.value_sum
        for valence in periodic.DEFAULT_VALENCES[atom.element]:
            if valence >= total:
                return valence - total
        return 0

    # -- copies ----------------------------------------------------------

    def copy_with(
        self,
        atoms: list[Atom] | None = None,
        bonds: list[Bond] | None = None,
        hcounts: list[int] | None = None,
    ) -> "MolGraph":
        g = MolGraph(atoms if atoms is not None else self.atoms,
                     bonds if bonds is not None else self.bonds)
        if hcounts is not None:
            g.set_hydrogen_counts(hcounts)
        return g

    def subgraph(self, keep: list[int], h_override: dict[int, int] | None = None) -> "MolGraph":
        """Induced subgraph on `keep` (old indices, order preserved).
        `h_override` pins explicit hydrogen counts on atoms whose bonding
        changed (e.g. scaffold atoms that lost substituents)."""
        index = {old: new for new, old in enumerate(keep)}
        atoms = []
        for old in keep:
            atom = self.atoms[old]
            if h_override is not None and old in h_override:
                atom = replace(atom, explicit_h=h_override[old])
            atoms.append(atom)
        bonds = [
            Bond(index[b.a], index[b.b], b.order)
            for b in self.bonds
            if b.a in index and b.b in index
        ]
        return MolGraph(atoms, bonds)


def _bare_aromatic_h(element: int, degree: int) -> int:
    """Implicit hydrogens on a bare lowercase atom (Daylight convention:
    aromatic n/o/s/p never carry an implicit H; c and b get one when they
    have only the two ring connections)."""
    sym = periodic.symbol(element)
    if sym in ("C", "B"):
        return 1 if degree == 2 else 0
    return 0


def total_h(g: MolGraph, idx: int) -> int:
    return g.hydrogen_count(idx)


def atom_signature(g: MolGraph, idx: int) -> tuple:
    """Attribute tuple used by isomorphism-style comparisons: everything
    chemically meaningful, with hydrogen counts resolved to totals."""
    a = g.atoms[idx]
    return (
        a.element,
        a.aromatic,
        a.formal_charge,
        g.hydrogen_count(idx),
        a.isotope,
        a.atom_map,
        a.chirality,
    )
