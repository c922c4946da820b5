"""Auxiliary supervision derived from charge labels.

The multitask decoder needs law-article and prison-term targets and the
attribute-augmented model needs per-charge binary attributes. Real label
semantics are out of scope here, so all three are deterministic functions
of the charge label, exposed for configuration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from ..corpus import INNOCENT
from ..errors import ValidationError


@dataclass(frozen=True)
class AttributeSpec:
    """Named binary attributes with a ground-truth bit per charge."""

    names: tuple[str, ...]
    assignments: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        for charge, bits in self.assignments.items():
            if len(bits) != len(self.names):
                raise ValidationError(
                    f"charge {charge!r}: {len(bits)} attribute bits for "
                    f"{len(self.names)} attributes"
                )
            if any(b not in (0, 1) for b in bits):
                raise ValidationError(f"charge {charge!r}: attribute bits must be 0 or 1")

    @property
    def count(self) -> int:
        return len(self.names)

    def bits(self, charge: str) -> tuple[int, ...]:
        try:
            return self.assignments[charge]
        except KeyError:
            raise ValidationError(f"no attribute assignment for charge {charge!r}")

    def to_json_dict(self) -> dict:
        return {"names": list(self.names), "assignments": {k: list(v) for k, v in self.assignments.items()}}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "AttributeSpec":
        return cls(
            names=tuple(data["names"]),
            assignments={k: tuple(int(b) for b in v) for k, v in data["assignments"].items()},
        )


def default_attribute_spec(label_set: Sequence[str], count: int = 10) -> AttributeSpec:
    """Binary-code attributes: distinct per charge, all-zero for INNOCENT."""
    names = tuple(f"attr_{j:02d}" for j in range(count))
    assignments: dict[str, tuple[int, ...]] = {}
    guilty = [label for label in label_set if label != INNOCENT]
    for i, charge in enumerate(guilty):
        code = i + 1
        bits = []
        for j in range(count):
            if j < 6:
                bits.append((code >> j) & 1)
            else:
                bits.append((code * (j + 1)) % 2)
        assignments[charge] = tuple(bits)
    assignments[INNOCENT] = tuple(0 for _ in range(count))
    return AttributeSpec(names=names, assignments=assignments)


def default_article_map(label_set: Sequence[str]) -> dict[str, int]:
    """One synthetic law article per label, INNOCENT included."""
    return {label: i for i, label in enumerate(label_set)}


def default_term_map(label_set: Sequence[str], buckets: int = 4) -> dict[str, int]:
    """Coarse prison-term buckets; INNOCENT maps to bucket 0 (no term)."""
    if buckets < 2:
        raise ValidationError("need at least 2 term buckets")
    out: dict[str, int] = {}
    i = 0
    for label in label_set:
        if label == INNOCENT:
            out[label] = 0
        else:
            out[label] = 1 + (i % (buckets - 1))
            i += 1
    return out
