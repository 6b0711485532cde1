"""Data augmentation: SMILES enumeration, root-aligned reaction pairs, and
conditional-generation prompt construction.

File formats handled here:
  .smi       one SMILES per line, optional TAB + identifier, '#' comments
  reactions  one "reactants>>products" per line, atom maps ":n" in brackets
  conditions CSV with a smiles column plus one column per property; an empty
             cell means the property is absent for that row
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from chemlm.smiles import (
    MolGraph,
    ParseError,
    canonical_smiles,
    check_validity,
    parse_smiles,
    serialize,
)
from chemlm.tokenizer import TokenSeq, Vocabulary, tokenize

SUBSET_PROBABILITIES = (0.1, 0.2, 0.3, 0.4)  # P(pick m of 4 properties), m=1..4


class UnmappedRoot(ValueError):
    pass


# -- SMILES enumeration ----------------------------------------------------


def enumerate_smiles(smiles: str, n: int, seed: int = 0) -> list[str]:
    """`n` alternative spellings drawn with random roots and traversal
    orders; every output reparses to the same canonical string (duplicates
    allowed, small molecules have few spellings)."""
    g = parse_smiles(smiles)
    verdict = check_validity(g)
    if not verdict:
        raise ValueError(f"cannot enumerate invalid molecule: {verdict.reason}")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        root = int(rng.integers(len(g.atoms)))
        out.append(serialize(g, root=root, order="random", seed=int(rng.integers(2**32))))
    return out


# -- reactions -------------------------------------------------------------


@dataclass
class ReactionRecord:
    reactants: MolGraph
    products: MolGraph
    direction: str = "retro"  # or "forward"

    def __post_init__(self) -> None:
        if self.direction not in ("retro", "forward"):
            raise ValueError(f"unknown direction {self.direction!r}")
        maps = [a.atom_map for a in self.products.atoms if a.atom_map is not None]
        if len(maps) != len(set(maps)):
            raise ValueError("duplicate atom map among products")
        reactant_maps = {
            a.atom_map for a in self.reactants.atoms if a.atom_map is not None
        }
        orphans = set(maps) - reactant_maps
        if orphans:
            raise ValueError(f"product maps without reactant partner: {sorted(orphans)}")

    @classmethod
    def from_line(cls, line: str, direction: str = "retro") -> "ReactionRecord":
        if ">>" not in line:
            raise ValueError("reaction line must contain '>>'")
        left, right = line.split(">>", 1)
        return cls(
            reactants=parse_smiles(left.strip()),
            products=parse_smiles(right.strip()),
            direction=direction,
        )

    def mapped_product_atoms(self) -> list[int]:
        return [
            i for i, a in enumerate(self.products.atoms) if a.atom_map is not None
        ]


def root_align(
    record: ReactionRecord, product_root: int, seed: int = 0
) -> tuple[str, str]:
    """(input, output) SMILES pair with the same mapped atom as root on both
    sides. The reactant component holding the partner atom comes first;
    remaining components follow in canonical order."""
    prod = record.products
    if not 0 <= product_root < len(prod.atoms):
        raise IndexError("product root out of range")
    map_value = prod.atoms[product_root].atom_map
    if map_value is None:
        raise UnmappedRoot(f"product atom {product_root} carries no atom map")
    partner = None
    for i, a in enumerate(record.reactants.atoms):
        if a.atom_map == map_value:
            partner = i
            break
    if partner is None:
        raise UnmappedRoot(f"no reactant atom with map {map_value}")

    product_str = serialize(prod, root=product_root)
    reactant_str = serialize(record.reactants, root=partner)
    if record.direction == "retro":
        return product_str, reactant_str
    return reactant_str, product_str


def augment_reactions(
    records: list[ReactionRecord], folds: int, seed: int = 0
) -> list[tuple[str, str]]:
    """`folds` root-aligned pairs per reaction. Distinct mapped roots are
    used first; once exhausted the remainder is drawn with replacement."""
    if folds < 1:
        raise ValueError("folds must be >= 1")
    rng = np.random.default_rng(seed)
    out: list[tuple[str, str]] = []
    for record in records:
        mapped = record.mapped_product_atoms()
        if not mapped:
            raise UnmappedRoot("reaction has no mapped product atoms")
        distinct = list(rng.permutation(mapped))[: min(folds, len(mapped))]
        roots = [int(r) for r in distinct]
        while len(roots) < folds:
            roots.append(int(mapped[int(rng.integers(len(mapped)))]))
        for root in roots:
            out.append(root_align(record, root, seed=int(rng.integers(2**32))))
    return out


# -- conditional prompts ----------------------------------------------------


@dataclass(frozen=True)
class Condition:
    name: str  # property-name token, e.g. "<MolWt>"
    value: float | int | str  # continuous | class index | scaffold SMILES
    kind: str  # "continuous" | "class" | "scaffold"

    def __post_init__(self) -> None:
        if self.kind not in ("continuous", "class", "scaffold"):
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.kind == "continuous" and not np.isfinite(float(self.value)):
            raise ValueError("continuous condition value must be finite")


@dataclass
class ConditionSpec:
    conditions: list[Condition]

    def __post_init__(self) -> None:
        names = [c.name for c in self.conditions]
        if len(names) != len(set(names)):
            raise ValueError("duplicate property names in condition spec")

    def __len__(self) -> int:
        return len(self.conditions)


def sample_condition_subset(spec: ConditionSpec, seed: int = 0) -> ConditionSpec:
    """Random subset of the spec's properties: the subset size m is drawn
    from (0.1, 0.2, 0.3, 0.4) over m = 1..4 (renormalized when fewer than 4
    properties exist), members uniformly without replacement, order
    randomized."""
    k = len(spec)
    if k == 0:
        raise ValueError("empty condition spec")
    if k > len(SUBSET_PROBABILITIES):
        raise ValueError("condition spec limited to 4 properties")
    rng = np.random.default_rng(seed)
    probs = np.array(SUBSET_PROBABILITIES[:k], dtype=np.float64)
    probs /= probs.sum()
    m = int(rng.choice(np.arange(1, k + 1), p=probs))
    picked = rng.choice(k, size=m, replace=False)
    return ConditionSpec([spec.conditions[int(i)] for i in picked])


@dataclass(frozen=True)
class CondNormalizer:
    """Per-property z-score statistics, fit on the training split and stored
    with the checkpoint."""

    mean: dict[str, float]
    std: dict[str, float]

    @classmethod
    def fit(cls, values: dict[str, list[float]]) -> "CondNormalizer":
        mean = {}
        std = {}
        for name, vals in values.items():
            arr = np.asarray(vals, dtype=np.float64)
            mean[name] = float(arr.mean())
            s = float(arr.std())
            std[name] = s if s > 0 else 1.0
        return cls(mean, std)

    def normalize(self, name: str, value: float) -> float:
        return (float(value) - self.mean[name]) / self.std[name]


@dataclass
class Prompt:
    seq: TokenSeq
    slots: list[tuple[int, float]] = field(default_factory=list)  # (pos, z-value)


VALUE_TOKEN = "<val>"
SEP_TOKEN = "<sep>"


def class_token(index: int) -> str:
    return f"<C{index}>"


def build_prompt(
    spec: ConditionSpec,
    vocab: Vocabulary,
    normalizer: CondNormalizer | None = None,
) -> Prompt:
    """Token prompt for a condition spec: per condition the name token, then
    a value placeholder / class token / tokenized scaffold; terminated by the
    separator, with the boundary right after it. Continuous values are
    z-scored and recorded as (position, value) slots."""
    ids: list[int] = []
    slots: list[tuple[int, float]] = []
    for cond in spec.conditions:
        if cond.name not in vocab.id_of:
            raise KeyError(f"property token {cond.name!r} not in vocabulary")
        ids.append(vocab.id_of[cond.name])
        if cond.kind == "continuous":
            value = float(cond.value)
            if normalizer is not None:
                value = normalizer.normalize(cond.name, value)
            ids.append(vocab.id_of[VALUE_TOKEN])
            slots.append((len(ids) - 1, value))
        elif cond.kind == "class":
            tok = class_token(int(cond.value))
            if tok not in vocab.id_of:
                raise KeyError(f"class token {tok!r} not in vocabulary")
            ids.append(vocab.id_of[tok])
        else:  # scaffold
            ids.extend(tokenize(str(cond.value), vocab, append_eos=False).ids)
    if SEP_TOKEN not in vocab.id_of:
        raise KeyError(f"separator token {SEP_TOKEN!r} not in vocabulary")
    ids.append(vocab.id_of[SEP_TOKEN])
    return Prompt(seq=TokenSeq(ids=ids, boundary=len(ids)), slots=slots)


# -- file I/O ----------------------------------------------------------------


def read_smi(text: str) -> list[tuple[str, str | None]]:
    """Parse .smi content: one SMILES per line, optional TAB + identifier,
    '#'-prefixed comment lines and blank lines ignored."""
    out = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "\t" in stripped:
            smiles, ident = stripped.split("\t", 1)
            out.append((smiles.strip(), ident.strip() or None))
        else:
            out.append((stripped, None))
    return out


def read_reactions(text: str, direction: str = "retro") -> list[ReactionRecord]:
    out = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        out.append(ReactionRecord.from_line(stripped, direction))
    return out


def read_conditions_csv(text: str) -> list[tuple[str, dict[str, float]]]:
    """Rows of (smiles, {property: value}); empty cells mean absent."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or "smiles" not in reader.fieldnames:
        raise ValueError("conditions CSV needs a 'smiles' column")
    out = []
    for row in reader:
        props = {}
        for key, val in row.items():
            if key == "smiles" or val is None or val.strip() == "":
                continue
            props[key] = float(val)
        out.append((row["smiles"], props))
    return out
