"""Fingerprints, descriptors, and generation-quality metrics."""

from chemlm.metrics.descriptors import (
    CONTINUOUS_DESCRIPTORS,
    DESCRIPTOR_NAMES,
    INTEGER_DESCRIPTORS,
    DescriptorVector,
    descriptor_table,
    descriptors,
)
from chemlm.metrics.fingerprints import (
    Fingerprint,
    morgan_fingerprint,
    pack_fingerprints,
    pairwise_tanimoto_row,
    splitmix64,
    tanimoto,
)
from chemlm.metrics.generation import (
    GenerationReport,
    generation_metrics,
    internal_diversity,
    klsim,
    klsim_single,
    mad,
    scaffold_exact_match,
    scaffold_valid,
)

__all__ = [
    "CONTINUOUS_DESCRIPTORS",
    "DESCRIPTOR_NAMES",
    "INTEGER_DESCRIPTORS",
    "DescriptorVector",
    "Fingerprint",
    "GenerationReport",
    "descriptor_table",
    "descriptors",
    "generation_metrics",
    "internal_diversity",
    "klsim",
    "klsim_single",
    "mad",
    "morgan_fingerprint",
    "pack_fingerprints",
    "pairwise_tanimoto_row",
    "scaffold_exact_match",
    "scaffold_valid",
    "splitmix64",
    "tanimoto",
]
