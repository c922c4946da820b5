"""Reference rule model: convicts only when all four elements are present.

Knowledge is a per-charge table of marker phrases for each element. A
charge is satisfied when every element has at least one marker occurring
contiguously inside some sentence; among satisfied charges the highest
severity wins (aggravated variants outrank their base offence), and when
none is satisfied the verdict is INNOCENT with probability 1.

An empty marker pool counts as requiring nothing, so a knowledge table
with all pools empty degenerates into a constant predictor, which the
tests use as the input-ignoring baseline.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..corpus import Case, ELEMENT_KINDS, ElementKind, INNOCENT
from ..errors import ValidationError
from ..synth import SynthSpec, contains_phrase


@dataclass(frozen=True)
class OracleKnowledge:
    markers: Mapping[str, Mapping[ElementKind, tuple[tuple[str, ...], ...]]]
    severity: Mapping[str, int]

    def __post_init__(self):
        for charge in self.markers:
            if charge == INNOCENT:
                raise ValidationError("oracle knowledge must not define INNOCENT")
            if charge not in self.severity:
                raise ValidationError(f"no severity rank for charge {charge!r}")

    @property
    def charges(self) -> tuple[str, ...]:
        return tuple(sorted(self.markers))

    @classmethod
    def from_synth_spec(cls, spec: SynthSpec) -> "OracleKnowledge":
        markers: dict[str, dict[ElementKind, tuple[tuple[str, ...], ...]]] = {}
        for tpl in spec.templates:
            markers[tpl.name] = {
                kind: tuple(tuple(p.split()) for p in tpl.element_pools[kind])
                for kind in ELEMENT_KINDS
            }
        for pair in spec.pairs:
            extra = (tuple(pair.common.split()), tuple(pair.uncommon.split()))
            markers[pair.target][pair.element] = markers[pair.target][pair.element] + extra
        severity = {tpl.name: tpl.severity for tpl in spec.templates}
        return cls(markers=markers, severity=severity)

    # -- matching ------------------------------------------------------------
    def sentence_kinds(self, sentence: Sequence[str]) -> frozenset:
        """Element kinds whose markers (of any charge) occur in the sentence."""
        found = set()
        for charge_markers in self.markers.values():
            for kind, phrases in charge_markers.items():
                if kind in found:
                    continue
                if any(contains_phrase(sentence, p) for p in phrases):
                    found.add(kind)
        return frozenset(found)

    def satisfied(self, charge: str, case: Case) -> bool:
        table = self.markers[charge]
        for kind in ELEMENT_KINDS:
            phrases = table.get(kind, ())
            if not phrases:
                continue  # vacuously satisfied
            if not any(
                contains_phrase(sent, p) for sent in case.sentences for p in phrases
            ):
                return False
        return True

    def verdict(self, case: Case) -> str:
        candidates = [c for c in sorted(self.markers) if self.satisfied(c, case)]
        if not candidates:
            return INNOCENT
        candidates.sort(key=lambda c: (-self.severity[c], c))
        return candidates[0]

    # -- serialization ---------------------------------------------------------
    def to_json_dict(self) -> dict:
        return {
            "markers": {
                charge: {kind.value: [" ".join(p) for p in table.get(kind, ())] for kind in ELEMENT_KINDS}
                for charge, table in self.markers.items()
            },
            "severity": dict(self.severity),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "OracleKnowledge":
        markers = {
            charge: {
                ElementKind(kind): tuple(tuple(p.split()) for p in phrases)
                for kind, phrases in table.items()
            }
            for charge, table in data["markers"].items()
        }
        return cls(markers=markers, severity={k: int(v) for k, v in data["severity"].items()})


def oracle_encode_arrays(
    knowledge: OracleKnowledge, case: Case
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Four-dimensional marker indicator encoding.

    Every token inherits its sentence's element multi-hot, so the mean-pool
    of a sentence's token vectors equals the indicator exactly.
    """
    dim = len(ELEMENT_KINDS)
    sentence_vectors = np.zeros((len(case.sentences), dim))
    token_rows = []
    for i, sent in enumerate(case.sentences):
        kinds = knowledge.sentence_kinds(sent)
        for j, kind in enumerate(ELEMENT_KINDS):
            if kind in kinds:
                sentence_vectors[i, j] = 1.0
        token_rows.extend([sentence_vectors[i]] * len(sent))
    token_vectors = np.array(token_rows)
    fact_vector = token_vectors.mean(axis=0)
    return token_vectors, fact_vector, sentence_vectors
