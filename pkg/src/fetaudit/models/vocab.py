"""Token vocabulary with reserved padding/unknown indices."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..corpus import CaseSet
from ..errors import ValidationError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1


@dataclass(frozen=True)
class Vocab:
    token_to_index: Mapping[str, int]

    def __post_init__(self):
        indices = sorted(self.token_to_index.values())
        if indices != list(range(len(indices))):
            raise ValidationError("vocabulary indices must be dense from 0")
        if self.token_to_index.get(PAD_TOKEN) != PAD_INDEX:
            raise ValidationError(f"{PAD_TOKEN} must map to index {PAD_INDEX}")
        if self.token_to_index.get(UNK_TOKEN) != UNK_INDEX:
            raise ValidationError(f"{UNK_TOKEN} must map to index {UNK_INDEX}")

    @property
    def size(self) -> int:
        return len(self.token_to_index)

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.index(t) for t in tokens], dtype=np.int64)

    def ordered_tokens(self) -> list[str]:
        """Tokens in index order (including the reserved entries)."""
        inverse = {i: t for t, i in self.token_to_index.items()}
        return [inverse[i] for i in range(self.size)]

    @classmethod
    def from_ordered_tokens(cls, tokens: Sequence[str]) -> "Vocab":
        return cls(token_to_index={t: i for i, t in enumerate(tokens)})


def build_vocab(caseset: CaseSet, min_count: int = 1) -> Vocab:
    """Index tokens with frequency >= min_count; everything else is unknown.

    Ordering is by descending frequency then lexicographic, so two builds
    over the same corpus always agree.
    """
    if len(caseset) == 0:
        raise ValidationError("cannot build a vocabulary from an empty case set")
    counts = Counter(tok for case in caseset for tok in case.tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    mapping = {PAD_TOKEN: PAD_INDEX, UNK_TOKEN: UNK_INDEX}
    for token in kept:
        mapping[token] = len(mapping)
    return Vocab(token_to_index=mapping)
