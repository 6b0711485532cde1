"""Fixed-vocabulary SMILES tokenizer.

The base vocabulary holds upper- and lowercase forms of all 118 element
symbols, the digits 0-9, 19 SMILES punctuation symbols, and an end token
(266 chemical tokens), followed by one padding token. Task-time special
tokens (property names, class tokens, separators, value placeholders) are
appended later without disturbing existing ids.

Tokenization is greedy longest-match over the vocabulary, which reproduces
a bracket-grammar segmentation inside brackets ("[nH]" -> "[", "n", "H",
"]") because the vocabulary contains no merged bracket fragments.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from chemlm import periodic

EOS_TOKEN = "<eos>"
PAD_TOKEN = "<pad>"

# The 19 special symbols of the SMILES grammar family (ring-closure escape,
# brackets, bonds, charges, chirality, wildcards, reaction arrow).
SPECIAL_SYMBOLS = (
    "(", ")", "[", "]", "=", "#", "-", "+", ":", "/", "\\",
    ".", "%", "@", "@@", "*", "$", "~", ">",
)


class TokenizeError(ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


@dataclass
class TokenSeq:
    ids: list[int]
    boundary: int | None = None  # index of the first target position

    def __post_init__(self) -> None:
        if self.boundary is not None and not 0 <= self.boundary <= len(self.ids):
            raise ValueError("boundary out of range")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class Vocabulary:
    tokens: list[str]
    eos_id: int
    pad_id: int
    special: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.id_of: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        self._rebuild_matcher()

    def _rebuild_matcher(self) -> None:
        by_first: dict[str, list[str]] = {}
        for tok in self.tokens:
            by_first.setdefault(tok[0], []).append(tok)
        for bucket in by_first.values():
            bucket.sort(key=len, reverse=True)
        self._by_first = by_first
        self._max_len = max(len(t) for t in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "tokens": self.tokens,
                "eos": self.eos_id,
                "pad": self.pad_id,
                "special": self.special,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        data = json.loads(text)
        return cls(
            tokens=list(data["tokens"]),
            eos_id=int(data["eos"]),
            pad_id=int(data["pad"]),
            special={k: int(v) for k, v in data["special"].items()},
        )

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def vocab_census() -> dict[str, int]:
    """Break down the base vocabulary size; the printed reference figure for
    the chemical inventory is 266 and our construction lands exactly there."""
    return {
        "element_tokens": 2 * periodic.NUM_ELEMENTS,
        "digit_tokens": 10,
        "symbol_tokens": len(SPECIAL_SYMBOLS),
        "end_token": 1,
        "chemical_total": 2 * periodic.NUM_ELEMENTS + 10 + len(SPECIAL_SYMBOLS) + 1,
        "padding_token": 1,
    }


def build_base_vocab() -> Vocabulary:
    tokens: list[str] = []
    tokens.extend(SPECIAL_SYMBOLS)
    tokens.extend(str(d) for d in range(10))
    tokens.extend(periodic.SYMBOLS)
    tokens.extend(s.lower() for s in periodic.SYMBOLS)
    tokens.append(EOS_TOKEN)
    eos_id = len(tokens) - 1
    tokens.append(PAD_TOKEN)
    pad_id = len(tokens) - 1
    return Vocabulary(tokens=tokens, eos_id=eos_id, pad_id=pad_id)


def tokenize(text: str, vocab: Vocabulary, *, append_eos: bool = True) -> TokenSeq:
    """Greedy longest-match segmentation; raises TokenizeError on the first
    unmatched character."""
    ids: list[int] = []
    i = 0
    n = len(text)
    while i < n:
        bucket = vocab._by_first.get(text[i])
        matched = None
        if bucket is not None:
            for tok in bucket:
                if text.startswith(tok, i):
                    matched = tok
                    break
        if matched is None:
            raise TokenizeError(i, f"no token matches {text[i:i + 8]!r}")
        ids.append(vocab.id_of[matched])
        i += len(matched)
    if append_eos:
        ids.append(vocab.eos_id)
    return TokenSeq(ids=ids)


def detokenize(seq: TokenSeq | list[int], vocab: Vocabulary) -> str:
    """Inverse of tokenize: concatenate tokens, dropping eos and padding."""
    ids = seq.ids if isinstance(seq, TokenSeq) else seq
    parts = []
    for i in ids:
        if i == vocab.eos_id or i == vocab.pad_id:
            continue
        parts.append(vocab.tokens[i])
    return "".join(parts)


def extend_with_task_tokens(vocab: Vocabulary, names: list[str]) -> Vocabulary:
    """New vocabulary with `names` appended; existing ids are untouched, so
    embedding rows for old ids stay valid."""
    for name in names:
        if name in vocab.id_of:
            raise ValueError(f"token {name!r} already in vocabulary")
    if len(set(names)) != len(names):
        raise ValueError("duplicate names in extension")
    tokens = vocab.tokens + list(names)
    special = dict(vocab.special)
    for name in names:
        special[name] = vocab.id_of.get(name, tokens.index(name))
    return Vocabulary(
        tokens=tokens, eos_id=vocab.eos_id, pad_id=vocab.pad_id, special=special
    )
