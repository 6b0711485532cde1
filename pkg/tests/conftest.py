import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from chemlm.model import CausalLM, ModelConfig
from chemlm.tokenizer import build_base_vocab

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def vocab():
    return build_base_vocab()


@pytest.fixture()
def tiny_model_factory(vocab):
    def make(n_layers=2, d_model=16, n_heads=4, d_ff=44, n_ctx=64,
             vocab_size=None, seed=0, dtype=torch.float64):
        cfg = ModelConfig(
            n_layers=n_layers, n_heads=n_heads, n_ctx=n_ctx,
            d_model=d_model, d_ff=d_ff,
            vocab_size=vocab_size or len(vocab),
        )
        return CausalLM(cfg, seed=seed).to(dtype)

    return make


CORPUS_50 = [
    "CCO", "CCC", "CCN", "CCOC", "CC(C)O", "CC(=O)O", "c1ccccc1", "Cc1ccccc1",
    "CCc1ccccc1", "c1ccncc1", "CC(C)C", "CCCC", "CCCCC", "OCCO", "NCCN",
    "CC(N)C(=O)O", "c1ccoc1", "c1ccsc1", "C1CCCCC1", "C1CCCC1", "CC(=O)N",
    "CCS", "CCCl", "CCBr", "CCF", "CC#N", "C=C", "C#C", "CC=O", "OC=O",
    "c1ccc2ccccc2c1", "Cn1cccc1", "c1cc[nH]c1", "CC(C)(C)C", "CCCO",
    "CC(O)C", "COC(=O)C", "CCNC", "CN(C)C", "C1CCNCC1", "C1CCOC1",
    "O=C1CCCCC1", "CC1CCCCC1", "Clc1ccccc1", "Nc1ccccc1", "Oc1ccccc1",
    "CC(=O)Oc1ccccc1C(=O)O", "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "O=C(Cc1ccccc1)NCc1ccccc1", "CCOC(=O)C",
]


@pytest.fixture(scope="session")
def small_corpus():
    return list(CORPUS_50)
