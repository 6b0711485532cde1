"""Chemical validity: kekulizability plus a fixed valence table.

A graph is valid when kekulization succeeds and every atom of a checked
element has bond-order sum + hydrogen count inside the element's allowed
valence set; a formal charge of q widens the set by +-|q| (standard
convention: [N+] reaches 4, [O-] reaches 1, [B-] reaches 4). Elements
outside the table are not valence-checked.
"""

from __future__ import annotations

from dataclasses import dataclass

from chemlm import periodic
from chemlm.smiles.graph import MolGraph
from chemlm.smiles.kekulize import KekulizeError, kekulize


@dataclass(frozen=True)
class ValidityVerdict:
    valid: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.valid


def allowed_valences(element: int, charge: int) -> frozenset[int]:
    base = periodic.DEFAULT_VALENCES.get(element)
    if base is None:
        return frozenset()
    shift = abs(charge)
    return frozenset(
        v + d for v in base for d in (-shift, shift) if v + d >= 0
    )


def check_validity(g: MolGraph) -> ValidityVerdict:
    try:
        kek = kekulize(g)
    except KekulizeError as exc:
        return ValidityVerdict(False, f"kekulization failed: {exc}")

    for i, atom in enumerate(kek.atoms):
        allowed = allowed_valences(atom.element, atom.formal_charge)
        if not allowed:
            continue
        total = kek.hydrogen_count(i)
        for bi in kek.adjacency[i]:
            total += kek.bonds[bi].order.value_sum
        if total not in allowed:
            note = f" (charge {atom.formal_charge:+d})" if atom.formal_charge else ""
            return ValidityVerdict(
                False,
                f"{atom.symbol} valence {total}{note} not in {sorted(allowed)}",
            )
    return ValidityVerdict(True)
