"""Generation-quality metrics: validity, uniqueness, novelty, internal
diversity, distribution similarity, property deviation and scaffold checks.

IntDiv_p follows the double-sum definition over all ordered pairs including
self-pairs:  1 - (|G|^-2 * sum S(m1,m2)^p)^(1/p).
KLSim is the mean over descriptors of exp(-KL(gen || ref)) with fixed
binning (100 equal-width bins for continuous descriptors, categorical over
the observed support for counts, 1e-10 smoothing mass per bin).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from chemlm.metrics.descriptors import (
    CONTINUOUS_DESCRIPTORS,
    DESCRIPTOR_NAMES,
    descriptor_table,
)
from chemlm.metrics.fingerprints import (
    Fingerprint,
    morgan_fingerprint,
    pack_fingerprints,
    pairwise_tanimoto_row,
    tanimoto,
)
from chemlm.smiles import (
    MolGraph,
    ParseError,
    canonical_smiles,
    check_validity,
    murcko_scaffold,
    parse_smiles,
)

KL_BINS = 100
KL_EPSILON = 1e-10


@dataclass
class GenerationReport:
    n_generated: int
    validity: float
    uniqueness: float
    novelty: float
    intdiv1: float
    intdiv2: float
    klsim: float | None
    n_valid: int
    n_unique: int
    n_novel: int
    mad: dict[str, float] = field(default_factory=dict)
    scaffold_match_count: int | None = None
    scaffold_similar_count: int | None = None
    binning: dict = field(
        default_factory=lambda: {"bins": KL_BINS, "epsilon": KL_EPSILON}
    )

    def __post_init__(self) -> None:
        for name in ("validity", "uniqueness", "novelty", "intdiv1", "intdiv2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{name} out of [0,1]: {v}")
        if not self.n_generated >= self.n_valid >= self.n_unique >= self.n_novel:
            raise ValueError("count monotonicity violated")

    def to_json(self) -> str:
        payload = dict(self.__dict__)
        return json.dumps(payload, indent=2, sort_keys=True)


def mad(conditioned: list[float], computed: list[float]) -> float:
    """Mean absolute deviation between requested and realized values."""
    if len(conditioned) != len(computed):
        raise ValueError("length mismatch")
    if not conditioned:
        raise ValueError("empty input")
    return float(
        np.mean(np.abs(np.asarray(conditioned, float) - np.asarray(computed, float)))
    )


def klsim_single(
    gen_values, ref_values, kind: str, bins: int = KL_BINS, epsilon: float = KL_EPSILON
) -> float:
    """exp(-KL(gen || ref)) for one descriptor distribution."""
    gen = np.asarray(gen_values, dtype=np.float64)
    ref = np.asarray(ref_values, dtype=np.float64)
    if gen.size == 0 or ref.size == 0:
        raise ValueError("empty sample")
    if kind == "continuous":
        lo = min(gen.min(), ref.min())
        hi = max(gen.max(), ref.max())
        if hi <= lo:
            return 1.0
        edges = np.linspace(lo, hi, bins + 1)
        p, _ = np.histogram(gen, bins=edges)
        q, _ = np.histogram(ref, bins=edges)
    elif kind == "integer":
        support = np.union1d(np.unique(gen), np.unique(ref))
        p = np.array([(gen == v).sum() for v in support], dtype=np.float64)
        q = np.array([(ref == v).sum() for v in support], dtype=np.float64)
    else:
        raise ValueError(f"unknown descriptor kind {kind!r}")
    p = p.astype(np.float64) + epsilon
    q = q.astype(np.float64) + epsilon
    p /= p.sum()
    q /= q.sum()
    kl = float(np.sum(p * np.log(p / q)))
    return math.exp(-kl)


def klsim(
    gen_table: dict[str, list[float]],
    ref_table: dict[str, list[float]],
    names=DESCRIPTOR_NAMES,
) -> float:
    """Mean descriptor-distribution similarity over `names`."""
    scores = []
    for name in names:
        kind = "continuous" if name in CONTINUOUS_DESCRIPTORS else "integer"
        scores.append(klsim_single(gen_table[name], ref_table[name], kind))
    return float(np.mean(scores))


def internal_diversity(fps: list[Fingerprint]) -> tuple[float, float]:
    """(IntDiv1, IntDiv2) over all ordered pairs including self-pairs."""
    if not fps:
        raise ValueError("no fingerprints")
    packed = pack_fingerprints(fps)
    n = len(fps)
    s1 = 0.0
    s2 = 0.0
    for i in range(n):
        row = pairwise_tanimoto_row(packed, i)
        s1 += row.sum()
        s2 += (row * row).sum()
    m1 = s1 / (n * n)
    m2 = s2 / (n * n)
    return 1.0 - m1, 1.0 - math.sqrt(m2)


def generation_metrics(
    generated: list[str],
    reference: set[str],
    ref_descriptors: dict[str, list[float]] | None = None,
    *,
    radius: int = 2,
    nbits: int = 2048,
) -> GenerationReport:
    """Score a generated SMILES list against a pre-canonicalized reference
    set (and optionally its descriptor table)."""
    if not generated:
        raise ValueError("empty generation list")

    valid_graphs: list[MolGraph] = []
    canon: list[str] = []
    for s in generated:
        try:
            g = parse_smiles(s)
        except ParseError:
            continue
        if not check_validity(g):
            continue
        valid_graphs.append(g)
        canon.append(canonical_smiles(g))

    n = len(generated)
    n_valid = len(valid_graphs)
    if n_valid == 0:
        return GenerationReport(
            n_generated=n, validity=0.0, uniqueness=0.0, novelty=0.0,
            intdiv1=0.0, intdiv2=0.0, klsim=None,
            n_valid=0, n_unique=0, n_novel=0,
        )

    unique = set(canon)
    novel = unique - reference
    fps = [morgan_fingerprint(g, radius, nbits) for g in valid_graphs]
    intdiv1, intdiv2 = internal_diversity(fps)

    kls = None
    if ref_descriptors is not None:
        gen_table = descriptor_table(valid_graphs)
        names = [k for k in DESCRIPTOR_NAMES if k in ref_descriptors]
        kls = klsim(gen_table, ref_descriptors, names)

    return GenerationReport(
        n_generated=n,
        validity=n_valid / n,
        uniqueness=len(unique) / n_valid,
        novelty=len(novel) / len(unique),
        intdiv1=intdiv1,
        intdiv2=intdiv2,
        klsim=kls,
        n_valid=n_valid,
        n_unique=len(unique),
        n_novel=len(novel),
    )


def scaffold_valid(
    g: MolGraph | str,
    target_scaffold: MolGraph,
    threshold: float = 0.8,
    *,
    radius: int = 2,
    nbits: int = 2048,
) -> bool:
    """Chemically valid and scaffold-similar (Tanimoto >= threshold, with
    equality counting as a pass)."""
    if isinstance(g, str):
        try:
            g = parse_smiles(g)
        except ParseError:
            return False
    if not check_validity(g):
        return False
    scaf = murcko_scaffold(g)
    fp_g = morgan_fingerprint(scaf, radius, nbits)
    fp_t = morgan_fingerprint(target_scaffold, radius, nbits)
    if (fp_g.bits == 0) != (fp_t.bits == 0):
        return False  # exactly one side empty: similarity 0 by convention
    return tanimoto(fp_g, fp_t) >= threshold


def scaffold_exact_match(g: MolGraph | str, target_scaffold: MolGraph) -> bool:
    """Canonical-string equality of the Murcko scaffolds."""
    if isinstance(g, str):
        try:
            g = parse_smiles(g)
        except ParseError:
            return False
    scaf = murcko_scaffold(g)
    if not scaf.atoms or not target_scaffold.atoms:
        return bool(scaf.atoms) == bool(target_scaffold.atoms)
    return canonical_smiles(scaf) == canonical_smiles(target_scaffold)
