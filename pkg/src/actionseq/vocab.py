"""Token vocabularies for actions and caption words.

A vocabulary is an ordered list of C unique names. Ids are positional:
class j maps to j for 0 <= j < C, and three reserved protocol tokens
follow: SOS = C, EOS = C + 1, PAD = C + 2. Reserved tokens never appear
in ground-truth sequences; they exist only for the decoding protocol.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, List, Sequence

SOS_NAME = "<SOS>"
EOS_NAME = "<EOS>"
PAD_NAME = "<PAD>"


class Vocabulary:
    """Ordered token list with implicit SOS/EOS/PAD ids after the real tokens."""

    def __init__(self, names: Sequence[str]):
        names = list(names)
        if len(names) < 1:
            raise ValueError("vocabulary needs at least one token")
        if len(set(names)) != len(names):
            raise ValueError("vocabulary names must be unique")
        for n in names:
            if not n or any(ch.isspace() for ch in n):
                raise ValueError(f"invalid token name {n!r}: empty or contains whitespace")
        self.names: List[str] = names
        self._ids = {n: i for i, n in enumerate(names)}

    @property
    def n_classes(self) -> int:
        return len(self.names)

    @property
    def n_symbols(self) -> int:
        """Class count plus the three reserved tokens."""
        return len(self.names) + 3

    @property
    def sos(self) -> int:
        return len(self.names)

    @property
    def eos(self) -> int:
        return len(self.names) + 1

    @property
    def pad(self) -> int:
        return len(self.names) + 2

    def encode(self, tokens: Iterable[str]) -> List[int]:
        out = []
        for t in tokens:
            if t not in self._ids:
                raise KeyError(f"unknown token {t!r}")
            out.append(self._ids[t])
        return out

    def decode(self, ids: Iterable[int]) -> List[str]:
        out = []
        for i in ids:
            if not 0 <= i < len(self.names):
                raise ValueError(f"id {i} is not a class id (vocabulary has {len(self.names)} classes)")
            out.append(self.names[i])
        return out

    def name_of(self, token_id: int) -> str:
        """Name for any id including the reserved ones (used in diagnostics)."""
        if 0 <= token_id < len(self.names):
            return self.names[token_id]
        return {self.sos: SOS_NAME, self.eos: EOS_NAME, self.pad: PAD_NAME}[token_id]

    def content_hash(self) -> str:
        return hashlib.sha256("\n".join(self.names).encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        """One token name per line; file order defines the ids."""
        with open(path, "w", encoding="utf-8") as f:
            for n in self.names:
                f.write(n + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            names = [line.strip() for line in f if line.strip()]
        return cls(names)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.names == other.names

    def __len__(self) -> int:
        return len(self.names)

    def __repr__(self) -> str:
        return f"Vocabulary({len(self.names)} tokens)"
