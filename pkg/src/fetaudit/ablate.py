"""Presumption-of-innocence audit: criminal-element ablation.

For each guilty case every sentence related to a chosen element is deleted
(multi-label sentences drop whole), and the model is queried on the
complete and the ablated text. Reported per element: the consistency ratio
(argmax unchanged relative to the complete-text prediction), the paired
probabilities of the case's own charge, and the paired probabilities of
INNOCENT. Cases emptied by the removal are skipped and counted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import metrics as metrics_mod
from .corpus import AnnotatedCase, AnnotatedCaseSet, Case, ElementKind, INNOCENT
from .errors import EmptiedCaseError, ValidationError
from .metrics import DistSummary
from .models import ModelBundle, predict_batch

CONDITION_LABELS = {
    ElementKind.SUBJECT: "-Subject",
    ElementKind.MENTAL_STATE: "-Mental",
    ElementKind.CONDUCT: "-Conduct",
    ElementKind.OBJECT: "-Object",
}
COMPLETE_LABEL = "Complete"


@dataclass(frozen=True)
class AblatedCase:
    original_id: str
    removed: ElementKind
    sentences: tuple[tuple[str, ...], ...]

    def to_case(self, original: Case) -> Case:
        return Case(
            id=f"{original.id}::-{self.removed.value}",
            sentences=self.sentences,
            charge=original.charge,
            split=original.split,
            source=original.source,
        )


def remove_element(annotated_case: AnnotatedCase, element: ElementKind) -> AblatedCase:
    """Drop every sentence whose element set contains ``element``.

    Multi-label sentences are removed whole; survivors keep their order.
    Raises EmptiedCaseError when nothing survives.
    """
    case = annotated_case.case
    if case.charge == INNOCENT:
        raise ValidationError(f"case {case.id} is innocent; ablation targets guilty cases")
    survivors = [
        sent
        for sent, label in zip(case.sentences, annotated_case.labels)
        if element not in label
    ]
    if not survivors:
        raise EmptiedCaseError(f"case {case.id}: removing {element.value} empties the case")
    return AblatedCase(
        original_id=case.id, removed=element, sentences=tuple(survivors)
    )


@dataclass(frozen=True)
class CasePair:
    case_id: str
    charge: str
    pred_before: str
    pred_after: str
    p_orig_before: float
    p_orig_after: float
    p_innocent_before: float
    p_innocent_after: float


@dataclass(frozen=True)
class ConsistencyResult:
    element: ElementKind
    evaluated: int
    skipped: int
    pairs: tuple[CasePair, ...]

    def __post_init__(self):
        if self.evaluated != len(self.pairs):
            raise ValidationError("evaluated count must match the paired records")

    @property
    def consistency(self) -> float:
        """Fraction whose argmax matches the complete-text prediction."""
        if not self.pairs:
            return 0.0
        same = sum(1 for p in self.pairs if p.pred_after == p.pred_before)
        return same / len(self.pairs)

    @property
    def consistency_vs_gold(self) -> float:
        """Diagnostic slice: agreement with the gold charge after ablation."""
        if not self.pairs:
            return 0.0
        return sum(1 for p in self.pairs if p.pred_after == p.charge) / len(self.pairs)

    @property
    def consistency_correct_subset(self) -> float | None:
        """Consistency restricted to cases the model got right originally."""
        correct = [p for p in self.pairs if p.pred_before == p.charge]
        if not correct:
            return None
        return sum(1 for p in correct if p.pred_after == p.pred_before) / len(correct)

    @property
    def mean_innocent_before(self) -> float:
        return float(np.mean([p.p_innocent_before for p in self.pairs]))

    @property
    def mean_innocent_after(self) -> float:
        return float(np.mean([p.p_innocent_after for p in self.pairs]))


def run_ablation(
    bundle: ModelBundle, annotated_set: AnnotatedCaseSet, element: ElementKind
) -> ConsistencyResult:
    """Predict every guilty case with and without ``element`` sentences."""
    if len(annotated_set) == 0:
        raise ValidationError("ablation over an empty annotated set")
    guilty = [e for e in annotated_set if e.case.charge != INNOCENT]
    kept: list[tuple[AnnotatedCase, Case]] = []
    skipped = 0
    for entry in guilty:
        try:
            ablated = remove_element(entry, element)
        except EmptiedCaseError:
            skipped += 1
            continue
        kept.append((entry, ablated.to_case(entry.case)))
    if not kept:
        raise ValidationError(
            f"removing {element.value} emptied every guilty case; nothing to evaluate"
        )
    before = predict_batch(bundle, [entry.case for entry, _ in kept])
    after = predict_batch(bundle, [ablated for _, ablated in kept])
    pairs = []
    for (entry, _), b, a in zip(kept, before, after):
        pairs.append(
            CasePair(
                case_id=entry.case.id,
                charge=entry.case.charge,
                pred_before=b.top(),
                pred_after=a.top(),
                p_orig_before=b.prob(entry.case.charge),
                p_orig_after=a.prob(entry.case.charge),
                p_innocent_before=b.prob(INNOCENT),
                p_innocent_after=a.prob(INNOCENT),
            )
        )
    return ConsistencyResult(
        element=element, evaluated=len(pairs), skipped=skipped, pairs=tuple(pairs)
    )


@dataclass(frozen=True)
class ConditionSummary:
    condition: str
    confidence: DistSummary   # probability of the case's own charge
    innocent: DistSummary     # probability assigned to INNOCENT
    count: int


@dataclass(frozen=True)
class AblationSummary:
    conditions: tuple[ConditionSummary, ...]

    def get(self, condition: str) -> ConditionSummary:
        for c in self.conditions:
            if c.condition == condition:
                return c
        raise KeyError(condition)


def confidence_summary(results: Sequence[ConsistencyResult]) -> AblationSummary:
    """Distribution summaries per condition: Complete plus one per removed
    element (20-bin histogram of own-charge confidence, five-number summary
    of the INNOCENT probability)."""
    if not results:
        raise ValidationError("confidence_summary needs at least one ablation result")
    complete_conf: dict[str, float] = {}
    complete_inno: dict[str, float] = {}
    for result in results:
        for pair in result.pairs:
            complete_conf.setdefault(pair.case_id, pair.p_orig_before)
            complete_inno.setdefault(pair.case_id, pair.p_innocent_before)
    conditions = [
        ConditionSummary(
            condition=COMPLETE_LABEL,
            confidence=metrics_mod.dist_summary(list(complete_conf.values())),
            innocent=metrics_mod.dist_summary(list(complete_inno.values())),
            count=len(complete_conf),
        )
    ]
    for result in results:
        conditions.append(
            ConditionSummary(
                condition=CONDITION_LABELS[result.element],
                confidence=metrics_mod.dist_summary([p.p_orig_after for p in result.pairs]),
                innocent=metrics_mod.dist_summary([p.p_innocent_after for p in result.pairs]),
                count=result.evaluated,
            )
        )
    return AblationSummary(conditions=tuple(conditions))
