"""SMILES parser for the supported grammar subset.

Accepted: organic-subset atoms (B C N O P S F Cl Br I, aromatic b c n o p s),
bracket atoms with isotope/chirality/H-count/charge/atom-map, bonds - = # :
/ \\ (slashes stored as single), ring-closure digits 0-9 and %nn, branches,
and '.' separators. Anything else is rejected with a positioned ParseError.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from chemlm import periodic
from chemlm.smiles.graph import Atom, Bond, BondOrder, MolGraph


class ParseErrorKind(Enum):
    UNEXPECTED_CHAR = "UnexpectedChar"
    UNCLOSED_RING_BOND = "UnclosedRingBond"
    UNCLOSED_BRANCH = "UnclosedBranch"
    BAD_BRACKET_ATOM = "BadBracketAtom"
    EMPTY_INPUT = "EmptyInput"


@dataclass
class ParseError(ValueError):
    kind: ParseErrorKind
    offset: int
    message: str

    def __str__(self) -> str:
        return f"{self.kind.value} at offset {self.offset}: {self.message}"


_BOND_CHARS: dict[str, BondOrder] = {
    "-": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
}

_BARE_TWO = ("Cl", "Br")
_BARE_ONE = set("BCNOPSFI")
_BARE_AROMATIC = set("bcnops")
_BRACKET_AROMATIC_TWO = ("se", "as")


@dataclass
class _RawBond:
    a: int
    b: int
    explicit: BondOrder | None  # None: default (single, or aromatic in ring)
    offset: int  # for error reporting on ':' misuse / duplicates


def parse_smiles(text: str) -> MolGraph:
    """Parse one SMILES string (possibly multi-compound) into a MolGraph."""
    if not text:
        raise ParseError(ParseErrorKind.EMPTY_INPUT, 0, "empty SMILES string")

    atoms: list[Atom] = []
    raw_bonds: list[_RawBond] = []
    bonded: set[tuple[int, int]] = set()
    prev: int | None = None
    branch_stack: list[tuple[int, int]] = []  # (prev atom, '(' offset)
    rings: dict[int, tuple[int, BondOrder | None, int]] = {}  # digit -> (atom, order, offset)
    pending: BondOrder | None = None
    pending_offset = 0
    n = len(text)
    i = 0

    def add_bond(a: int, b: int, explicit: BondOrder | None, offset: int) -> None:
        key = (a, b) if a < b else (b, a)
        if a == b:
            raise ParseError(
                ParseErrorKind.UNEXPECTED_CHAR, offset, "ring closure to the same atom"
            )
        if key in bonded:
            raise ParseError(
                ParseErrorKind.UNEXPECTED_CHAR, offset,
                f"duplicate bond between atoms {a} and {b}",
            )
        bonded.add(key)
        raw_bonds.append(_RawBond(a, b, explicit, offset))

    def attach(atom: Atom, offset: int) -> None:
        nonlocal prev, pending
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            add_bond(prev, idx, pending, pending_offset if pending else offset)
        elif pending is not None:
            raise ParseError(
                ParseErrorKind.UNEXPECTED_CHAR, pending_offset,
                "bond symbol with no preceding atom",
            )
        prev = idx
        pending = None

    while i < n:
        ch = text[i]

        if ch in _BOND_CHARS:
            if pending is not None:
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, i, "two bond symbols in a row"
                )
            pending = _BOND_CHARS[ch]
            pending_offset = i
            i += 1
            continue

        if ch == "(":
            if prev is None:
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, i, "branch opened before any atom"
                )
            if pending is not None:
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, i, "bond symbol before branch"
                )
            branch_stack.append((prev, i))
            i += 1
            continue

        if ch == ")":
            if not branch_stack:
                raise ParseError(
                    ParseErrorKind.UNCLOSED_BRANCH, i, "unmatched closing parenthesis"
                )
            if pending is not None:
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, i, "bond symbol before ')'"
                )
            opener, opener_off = branch_stack.pop()
            if prev == opener:
                raise ParseError(ParseErrorKind.UNEXPECTED_CHAR, i, "empty branch")
            prev = opener
            i += 1
            continue

        if ch == ".":
            if branch_stack:
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, i, "'.' inside a branch"
                )
            if pending is not None or prev is None:
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, i, "misplaced '.' separator"
                )
            if rings:
                off = min(entry[2] for entry in rings.values())
                raise ParseError(
                    ParseErrorKind.UNCLOSED_RING_BOND, off,
                    "ring bond still open at '.' separator",
                )
            prev = None
            i += 1
            if i == n:
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, i - 1, "trailing '.' separator"
                )
            continue

        if ch.isdigit() or ch == "%":
            if ch == "%":
                seg = text[i + 1 : i + 3]
                if len(seg) < 2 or not seg.isdigit():
                    raise ParseError(
                        ParseErrorKind.UNEXPECTED_CHAR, i,
                        "'%' must be followed by two digits",
                    )
                num = int(seg)
                width = 3
            else:
                num = int(ch)
                width = 1
            if prev is None:
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, i, "ring digit before any atom"
                )
            if num in rings:
                open_atom, open_order, open_off = rings.pop(num)
                if pending is not None and open_order is not None and pending is not open_order:
                    raise ParseError(
                        ParseErrorKind.UNEXPECTED_CHAR, i,
                        f"conflicting bond orders on ring closure {num}",
                    )
                order = pending if pending is not None else open_order
                add_bond(open_atom, prev, order, i)
            else:
                rings[num] = (prev, pending, i)
            pending = None
            i += width
            continue

        if ch == "[":
            atom, width = _parse_bracket(text, i)
            attach(atom, i)
            i += width
            continue

        two = text[i : i + 2]
        if two in _BARE_TWO:
            attach(Atom(element=periodic.ATOMIC_NUMBER[two]), i)
            i += 2
            continue
        if ch in _BARE_ONE:
            attach(Atom(element=periodic.ATOMIC_NUMBER[ch]), i)
            i += 1
            continue
        if ch in _BARE_AROMATIC:
            attach(
                Atom(element=periodic.ATOMIC_NUMBER[ch.upper()], aromatic=True), i
            )
            i += 1
            continue

        raise ParseError(
            ParseErrorKind.UNEXPECTED_CHAR, i, f"unexpected character {ch!r}"
        )

    if pending is not None:
        raise ParseError(
            ParseErrorKind.UNEXPECTED_CHAR, pending_offset, "dangling bond symbol"
        )
    if rings:
        off = min(entry[2] for entry in rings.values())
        raise ParseError(
            ParseErrorKind.UNCLOSED_RING_BOND, off, "unclosed ring bond"
        )
    if branch_stack:
        raise ParseError(
            ParseErrorKind.UNCLOSED_BRANCH, branch_stack[-1][1], "unclosed branch"
        )
    if not atoms:
        raise ParseError(ParseErrorKind.EMPTY_INPUT, 0, "no atoms in input")

    return _resolve(atoms, raw_bonds)


def _resolve(atoms: list[Atom], raw_bonds: list[_RawBond]) -> MolGraph:
    """Fix up default bond orders: an unspecified bond between two aromatic
    atoms is aromatic when it lies in a ring, single otherwise."""
    for rb in raw_bonds:
        if rb.explicit is BondOrder.AROMATIC:
            if not (atoms[rb.a].aromatic and atoms[rb.b].aromatic):
                raise ParseError(
                    ParseErrorKind.UNEXPECTED_CHAR, rb.offset,
                    "':' bond requires aromatic atoms on both ends",
                )

    candidates = [
        k
        for k, rb in enumerate(raw_bonds)
        if rb.explicit is None and atoms[rb.a].aromatic and atoms[rb.b].aromatic
    ]
    orders: list[BondOrder] = [
        rb.explicit if rb.explicit is not None else BondOrder.SINGLE
        for rb in raw_bonds
    ]
    if candidates:
        from chemlm.smiles.rings import bridges

        skeleton = MolGraph(atoms, [Bond(rb.a, rb.b) for rb in raw_bonds])
        bridge_keys = bridges(skeleton)
        for k in candidates:
            rb = raw_bonds[k]
            key = (rb.a, rb.b) if rb.a < rb.b else (rb.b, rb.a)
            if key not in bridge_keys:
                orders[k] = BondOrder.AROMATIC

    return MolGraph(
        atoms, [Bond(rb.a, rb.b, orders[k]) for k, rb in enumerate(raw_bonds)]
    )


def _parse_bracket(text: str, start: int) -> tuple[Atom, int]:
    """Parse a bracket atom beginning at text[start] == '['. Returns the atom
    and the number of characters consumed (including both brackets)."""
    n = len(text)

    def err(offset: int, message: str) -> ParseError:
        return ParseError(
            ParseErrorKind.BAD_BRACKET_ATOM, min(offset, n - 1), message
        )

    j = start + 1

    isotope: int | None = None
    k = j
    while k < n and text[k].isdigit():
        k += 1
    if k > j:
        isotope = int(text[j:k])
        if isotope == 0:
            raise err(j, "isotope must be positive")
        j = k

    element: int | None = None
    aromatic = False
    two = text[j : j + 2]
    if two in _BRACKET_AROMATIC_TWO:
        element = periodic.ATOMIC_NUMBER[two.capitalize()]
        aromatic = True
        j += 2
    elif len(two) == 2 and two in periodic.ATOMIC_NUMBER and two[1].islower():
        element = periodic.ATOMIC_NUMBER[two]
        j += 2
    elif j < n and text[j] in periodic.ATOMIC_NUMBER:
        element = periodic.ATOMIC_NUMBER[text[j]]
        j += 1
    elif j < n and text[j] in _BARE_AROMATIC:
        element = periodic.ATOMIC_NUMBER[text[j].upper()]
        aromatic = True
        j += 1
    else:
        raise err(j, "expected element symbol in bracket atom")

    if aromatic and element not in periodic.AROMATIC_CAPABLE:
        raise err(j - 1, f"element {periodic.symbol(element)} cannot be aromatic")

    chirality: str | None = None
    if j < n and text[j] == "@":
        if j + 1 < n and text[j + 1] == "@":
            chirality = "@@"
            j += 2
        else:
            chirality = "@"
            j += 1

    hcount = 0
    if j < n and text[j] == "H":
        j += 1
        k = j
        while k < n and text[k].isdigit():
            k += 1
        hcount = int(text[j:k]) if k > j else 1
        j = k

    charge = 0
    if j < n and text[j] in "+-":
        sign = 1 if text[j] == "+" else -1
        symb = text[j]
        j += 1
        k = j
        while k < n and text[k].isdigit():
            k += 1
        if k > j:
            charge = sign * int(text[j:k])
            j = k
        else:
            charge = sign
            while j < n and text[j] == symb:
                charge += sign
                j += 1

    atom_map: int | None = None
    if j < n and text[j] == ":":
        j += 1
        k = j
        while k < n and text[k].isdigit():
            k += 1
        if k == j:
            raise err(j, "':' in bracket atom must be followed by a map number")
        atom_map = int(text[j:k])
        if atom_map == 0:
            raise err(j, "atom map must be positive")
        j = k

    if j >= n or text[j] != "]":
        raise err(j, "missing ']' in bracket atom")
    j += 1

    try:
        atom = Atom(
            element=element,
            aromatic=aromatic,
            formal_charge=charge,
            explicit_h=hcount,
            isotope=isotope,
            atom_map=atom_map,
            chirality=chirality,
        )
    except ValueError as exc:
        raise err(start, str(exc)) from exc
    return atom, j - start
