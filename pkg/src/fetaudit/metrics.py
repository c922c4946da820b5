"""Shared metric kernel: accuracy, macro/micro P-R-F1, Cohen's kappa,
and bounded-distribution summaries.

Every function here is pure and small enough to be cross-checked against a
brute-force recount, which the test suite does on random instances.
Conventions used throughout:

* zero-denominator precision/recall/F1 are defined as 0 (and logged),
* macro averages run over labels with at least one gold instance,
* histograms over [0, 1] use right-closed bins, with 0.0 folded into the
  bottom bin.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

Label = Hashable


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest counts for a single label."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def support(self) -> int:
        return self.tp + self.fn


def confusion_counts(
    gold: Sequence[Label], pred: Sequence[Label], label_set: Iterable[Label]
) -> dict[Label, ConfusionCounts]:
    """Per-label one-vs-rest confusion counts for single-label predictions."""
    if len(gold) != len(pred):
        raise ValueError(f"gold/pred length mismatch: {len(gold)} vs {len(pred)}")
    n = len(gold)
    counts: dict[Label, ConfusionCounts] = {}
    for label in label_set:
        tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
        fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
        fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
        counts[label] = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=n - tp - fp - fn)
    return counts


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if tp + fp == 0:
        logger.debug("zero prediction count, precision defined as 0")
        precision = 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        logger.debug("zero gold count, recall defined as 0")
        recall = 0.0
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


def accuracy(gold: Sequence[Label], pred: Sequence[Label]) -> float:
    if not gold:
        raise ValueError("accuracy over empty input")
    if len(gold) != len(pred):
        raise ValueError(f"gold/pred length mismatch: {len(gold)} vs {len(pred)}")
    return sum(1 for g, p in zip(gold, pred) if g == p) / len(gold)


def macro_prf(
    gold: Sequence[Label], pred: Sequence[Label], label_set: Iterable[Label]
) -> tuple[float, float, float]:
    """Unweighted mean of per-label P/R/F1 over labels with gold support.

    Labels that never occur in ``gold`` are excluded from the average so a
    large closed label set does not dilute the score.
    """
    if not gold:
        raise ValueError("macro_prf over empty input")
    counts = confusion_counts(gold, pred, label_set)
    supported = [c for c in counts.values() if c.support > 0]
    if not supported:
        raise ValueError("no label in label_set has gold support")
    per_label = [_prf(c.tp, c.fp, c.fn) for c in supported]
    k = len(per_label)
    return (
        sum(p for p, _, _ in per_label) / k,
        sum(r for _, r, _ in per_label) / k,
        sum(f for _, _, f in per_label) / k,
    )


def micro_prf(
    gold_sets: Sequence[frozenset | set],
    pred_sets: Sequence[frozenset | set],
    kinds: Iterable[Label],
) -> tuple[float, float, float]:
    """Pooled TP/FP/FN over all (item, kind) membership decisions.

    ``kinds`` is the universe of positive classes; the empty set is the
    all-negative outcome and contributes no positive decisions.
    """
    if len(gold_sets) == 0:
        raise ValueError("micro_prf over empty input")
    if len(gold_sets) != len(pred_sets):
        raise ValueError("gold/pred length mismatch")
    kinds = tuple(kinds)
    tp = fp = fn = 0
    for g, p in zip(gold_sets, pred_sets):
        for kind in kinds:
            in_g = kind in g
            in_p = kind in p
            if in_g and in_p:
                tp += 1
            elif in_p:
                fp += 1
            elif in_g:
                fn += 1
    return _prf(tp, fp, fn)


def micro_counts(
    gold_sets: Sequence[frozenset | set],
    pred_sets: Sequence[frozenset | set],
    kinds: Iterable[Label],
) -> dict[Label, ConfusionCounts]:
    """Per-kind membership counts backing :func:`micro_prf`."""
    kinds = tuple(kinds)
    n = len(gold_sets)
    out: dict[Label, ConfusionCounts] = {}
    for kind in kinds:
        tp = sum(1 for g, p in zip(gold_sets, pred_sets) if kind in g and kind in p)
        fp = sum(1 for g, p in zip(gold_sets, pred_sets) if kind not in g and kind in p)
        fn = sum(1 for g, p in zip(gold_sets, pred_sets) if kind in g and kind not in p)
        out[kind] = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=n - tp - fp - fn)
    return out


@dataclass(frozen=True)
class AgreementReport:
    """Observed agreement, chance agreement and Cohen's kappa."""

    observed: float
    expected: float
    kappa: float


def cohen_kappa(labels_a: Sequence[Label], labels_b: Sequence[Label]) -> AgreementReport:
    """Cohen's kappa for two equal-length single-label sequences.

    Chance agreement uses the product of the two annotators' marginals.
    When both marginals are point masses on the same label (expected
    agreement 1), kappa is defined as 1.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError(
            f"annotator sequences differ in length: {len(labels_a)} vs {len(labels_b)}"
        )
    n = len(labels_a)
    if n == 0:
        raise ValueError("cohen_kappa over empty input")
    agree = sum(1 for a, b in zip(labels_a, labels_b) if a == b)
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    # integer arithmetic keeps the p_e == 1 test exact
    expected_num = sum(count_a[label] * count_b.get(label, 0) for label in count_a)
    p_o = agree / n
    p_e = expected_num / (n * n)
    if expected_num == n * n:
        return AgreementReport(observed=p_o, expected=1.0, kappa=1.0)
    kappa = (p_o - p_e) / (1.0 - p_e)
    return AgreementReport(observed=p_o, expected=p_e, kappa=kappa)


@dataclass(frozen=True)
class Histogram:
    """Fixed-width histogram over [0, 1]; bin i covers (edges[i], edges[i+1]]
    with the bottom bin additionally including 0."""

    edges: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class FiveNumber:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.minimum, self.q1, self.median, self.q3, self.maximum)


@dataclass(frozen=True)
class DistSummary:
    histogram: Histogram
    five_number: FiveNumber


def dist_summary(values: Sequence[float], bins: int = 20) -> DistSummary:
    """Histogram plus five-number summary for values in [0, 1].

    Quartiles interpolate linearly between closest ranks. Bins are
    right-closed so 1.0 lands in the top bin and 0.5 in the (0.45, 0.50]
    bin.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("dist_summary over empty input")
    if arr.ndim != 1:
        raise ValueError("dist_summary expects a flat sequence")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        bad = arr[(arr < 0.0) | (arr > 1.0)][0]
        raise ValueError(f"value out of [0, 1]: {bad}")
    edges = tuple(i / bins for i in range(bins + 1))
    upper = np.array(edges[1:])
    idx = np.searchsorted(upper, arr, side="left")
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    q1, median, q3 = np.quantile(arr, [0.25, 0.5, 0.75], method="linear")
    five = FiveNumber(
        minimum=float(arr.min()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        maximum=float(arr.max()),
    )
    return DistSummary(
        histogram=Histogram(edges=edges, counts=tuple(int(c) for c in counts)),
        five_number=five,
    )
