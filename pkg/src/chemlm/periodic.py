"""Periodic table data shared by the SMILES engine, tokenizer and descriptors.

Symbols are indexed by atomic number (1-118). Masses are standard atomic
weights; for elements without a stable isotope the mass number of the most
stable isotope is used.
"""

from __future__ import annotations

_ELEMENTS: list[tuple[str, float]] = [
    ("H", 1.008), ("He", 4.003), ("Li", 6.94), ("Be", 9.012), ("B", 10.81),
    ("C", 12.011), ("N", 14.007), ("O", 15.999), ("F", 18.998), ("Ne", 20.180),
    ("Na", 22.990), ("Mg", 24.305), ("Al", 26.982), ("Si", 28.085), ("P", 30.974),
    ("S", 32.06), ("Cl", 35.45), ("Ar", 39.948), ("K", 39.098), ("Ca", 40.078),
    ("Sc", 44.956), ("Ti", 47.867), ("V", 50.942), ("Cr", 51.996), ("Mn", 54.938),
    ("Fe", 55.845), ("Co", 58.933), ("Ni", 58.693), ("Cu", 63.546), ("Zn", 65.38),
    ("Ga", 69.723), ("Ge", 72.630), ("As", 74.922), ("Se", 78.971), ("Br", 79.904),
    ("Kr", 83.798), ("Rb", 85.468), ("Sr", 87.62), ("Y", 88.906), ("Zr", 91.224),
    ("Nb", 92.906), ("Mo", 95.95), ("Tc", 97.0), ("Ru", 101.07), ("Rh", 102.906),
    ("Pd", 106.42), ("Ag", 107.868), ("Cd", 112.414), ("In", 114.818), ("Sn", 118.710),
    ("Sb", 121.760), ("Te", 127.60), ("I", 126.904), ("Xe", 131.293), ("Cs", 132.905),
    ("Ba", 137.327), ("La", 138.905), ("Ce", 140.116), ("Pr", 140.908), ("Nd", 144.242),
    ("Pm", 145.0), ("Sm", 150.36), ("Eu", 151.964), ("Gd", 157.25), ("Tb", 158.925),
    ("Dy", 162.500), ("Ho", 164.930), ("Er", 167.259), ("Tm", 168.934), ("Yb", 173.045),
    ("Lu", 174.967), ("Hf", 178.486), ("Ta", 180.948), ("W", 183.84), ("Re", 186.207),
    ("Os", 190.23), ("Ir", 192.217), ("Pt", 195.084), ("Au", 196.967), ("Hg", 200.592),
    ("Tl", 204.38), ("Pb", 207.2), ("Bi", 208.980), ("Po", 209.0), ("At", 210.0),
    ("Rn", 222.0), ("Fr", 223.0), ("Ra", 226.0), ("Ac", 227.0), ("Th", 232.038),
    ("Pa", 231.036), ("U", 238.029), ("Np", 237.0), ("Pu", 244.0), ("Am", 243.0),
    ("Cm", 247.0), ("Bk", 247.0), ("Cf", 251.0), ("Es", 252.0), ("Fm", 257.0),
    ("Md", 258.0), ("No", 259.0), ("Lr", 266.0), ("Rf", 267.0), ("Db", 268.0),
    ("Sg", 269.0), ("Bh", 270.0), ("Hs", 277.0), ("Mt", 278.0), ("Ds", 281.0),
    ("Rg", 282.0), ("Cn", 285.0), ("Nh", 286.0), ("Fl", 289.0), ("Mc", 290.0),
    ("Lv", 293.0), ("Ts", 294.0), ("Og", 294.0),
]

NUM_ELEMENTS = len(_ELEMENTS)  # 118

SYMBOLS: tuple[str, ...] = tuple(sym for sym, _ in _ELEMENTS)
MASSES: tuple[float, ...] = tuple(mass for _, mass in _ELEMENTS)

ATOMIC_NUMBER: dict[str, int] = {sym: i + 1 for i, (sym, _) in enumerate(_ELEMENTS)}

HYDROGEN_MASS = MASSES[0]


def symbol(z: int) -> str:
    return SYMBOLS[z - 1]


def mass(z: int) -> float:
    return MASSES[z - 1]


# Elements that may carry the aromatic flag.
AROMATIC_CAPABLE: frozenset[int] = frozenset(
    ATOMIC_NUMBER[s] for s in ("B", "C", "N", "O", "P", "S", "Se", "As")
)

# Organic subset: writable without brackets; implicit hydrogens filled from
# DEFAULT_VALENCES. Aromatic lowercase bare forms are b c n o p s only.
ORGANIC_SUBSET: frozenset[int] = frozenset(
    ATOMIC_NUMBER[s] for s in ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
)
ORGANIC_AROMATIC: frozenset[int] = frozenset(
    ATOMIC_NUMBER[s] for s in ("B", "C", "N", "O", "P", "S")
)

# Normal-valence lists, smallest first, used both for implicit-H filling and
# for the validity check. Elements not listed are not valence-checked.
DEFAULT_VALENCES: dict[int, tuple[int, ...]] = {
    ATOMIC_NUMBER["B"]: (3,),
    ATOMIC_NUMBER["C"]: (4,),
    ATOMIC_NUMBER["N"]: (3, 5),
    ATOMIC_NUMBER["O"]: (2,),
    ATOMIC_NUMBER["P"]: (3, 5),
    ATOMIC_NUMBER["S"]: (2, 4, 6),
    ATOMIC_NUMBER["F"]: (1,),
    ATOMIC_NUMBER["Cl"]: (1,),
    ATOMIC_NUMBER["Br"]: (1,),
    ATOMIC_NUMBER["I"]: (1,),
}
