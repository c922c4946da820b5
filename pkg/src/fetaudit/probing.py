"""Selectivity audit: linear probing of frozen encoders.

The encoder under audit is frozen; its mean-pooled sentence vectors become
rows of a probe dataset, with the gold per-sentence element sets as
targets. Four independent logistic heads (one per element, the empty set
encoding NA) are fit per fold of a charge-stratified case-level k-fold
rotation, and per-charge micro P/R/F1 on the held-out fold is averaged
over folds. A frequency-matched random assigner provides the chance
baseline.

Two pooling modes exist for the micro metrics. The default pools
membership decisions over the four element kinds only; ``na_mode
="fifth_label"`` instead treats NA as an explicit fifth class.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import metrics as metrics_mod
from .corpus import AnnotatedCaseSet, ELEMENT_KINDS, ElementKind
from .errors import StratificationError, ValidationError
from .models import ModelBundle, encode_batch

NA_LABEL = "NA"
NA_MODES = ("empty_set", "fifth_label")


@dataclass(frozen=True)
class ProbeRow:
    vector: np.ndarray
    target: frozenset
    charge: str
    case_id: str
    sentence_index: int


@dataclass(frozen=True)
class ProbeDataset:
    rows: tuple[ProbeRow, ...]
    fold_of_case: Mapping[str, int]
    k: int

    @property
    def dim(self) -> int:
        return int(self.rows[0].vector.shape[0])

    def fold_of(self, row: ProbeRow) -> int:
        return self.fold_of_case[row.case_id]

    def rows_in_fold(self, fold: int) -> list[ProbeRow]:
        return [r for r in self.rows if self.fold_of(r) == fold]

    def rows_outside_fold(self, fold: int) -> list[ProbeRow]:
        return [r for r in self.rows if self.fold_of(r) != fold]


@dataclass(frozen=True)
class ProbeModel:
    """Four independent logistic heads over standardized features."""

    weights: np.ndarray        # (d, 4)
    bias: np.ndarray           # (4,)
    feature_mean: np.ndarray   # (d,)
    feature_scale: np.ndarray  # (d,)
    threshold: float = 0.5
    notes: tuple[str, ...] = ()

    def scores(self, vectors: np.ndarray) -> np.ndarray:
        z = (vectors - self.feature_mean) / self.feature_scale
        logits = z @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-logits))

    def predict_sets(self, vectors: np.ndarray) -> list[frozenset]:
        fired = self.scores(vectors) > self.threshold  # strict: 0.5 is negative
        return [
            frozenset(k for j, k in enumerate(ELEMENT_KINDS) if fired[i, j])
            for i in range(vectors.shape[0])
        ]


@dataclass(frozen=True)
class ChargeProbeMetrics:
    charge: str
    precision: float
    recall: float
    f1: float
    per_fold: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class ProbeReport:
    per_charge: tuple[ChargeProbeMetrics, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    na_mode: str
    k: int
    seed: int
    count_rows: tuple[dict, ...] = ()  # charge/fold/element TP FP FN rows

    def charge_metrics(self, charge: str) -> ChargeProbeMetrics:
        for m in self.per_charge:
            if m.charge == charge:
                return m
        raise KeyError(charge)


def stratified_case_folds(
    annotated_set: AnnotatedCaseSet, k: int, seed: int
) -> dict[str, int]:
    """Charge-stratified case-level fold assignment.

    Within each charge the fold sizes differ by at most one; charges are
    processed in sorted order, each distributing its shuffled cases to the
    currently least-loaded folds, which also keeps the global sizes within
    one of each other.
    """
    if k < 2:
        raise ValidationError("need at least 2 folds")
    by_charge: dict[str, list[str]] = {}
    for entry in annotated_set:
        by_charge.setdefault(entry.case.charge, []).append(entry.case.id)
    rng = np.random.default_rng(seed)
    loads = [0] * k
    assignment: dict[str, int] = {}
    for charge in sorted(by_charge):
        ids = by_charge[charge]
        if len(ids) < k:
            raise StratificationError(
                f"charge {charge!r} has {len(ids)} cases, fewer than k={k}"
            )
        order = rng.permutation(len(ids))
        fold_order = sorted(range(k), key=lambda f: (loads[f], f))
        for i, case_pos in enumerate(order):
            fold = fold_order[i % k]
            assignment[ids[case_pos]] = fold
            loads[fold] += 1
    return assignment


def extract_probe_dataset(
    bundle: ModelBundle, annotated_set: AnnotatedCaseSet, k: int = 5, seed: int = 0
) -> ProbeDataset:
    """One row per sentence, vectors from the frozen encoder's mean pooling."""
    if len(annotated_set) == 0:
        raise ValidationError("cannot probe an empty annotated set")
    fold_of_case = stratified_case_folds(annotated_set, k, seed)
    rows: list[ProbeRow] = []
    entries = list(annotated_set)
    chunk = 64
    for start in range(0, len(entries), chunk):
        part = entries[start : start + chunk]
        outputs = encode_batch(bundle, [e.case for e in part])
        for entry, out in zip(part, outputs):
            for i, label in enumerate(entry.labels):
                rows.append(
                    ProbeRow(
                        vector=np.asarray(out.sentence_vectors[i], dtype=np.float64),
                        target=label,
                        charge=entry.case.charge,
                        case_id=entry.case.id,
                        sentence_index=i,
                    )
                )
    return ProbeDataset(rows=tuple(rows), fold_of_case=fold_of_case, k=k)


def train_probe(
    dataset: ProbeDataset,
    held_out_fold: int,
    iters: int = 300,
    lr: float = 0.5,
    l2: float = 1e-3,
) -> ProbeModel:
    """Fit the four logistic heads on all rows outside ``held_out_fold``.

    Full-batch gradient descent on standardized features; a head whose
    training rows are single-class simply fits the constant side, which is
    recorded in the model notes.
    """
    if dataset.k < 2:
        raise ValidationError("probe dataset must have at least 2 folds")
    rows = dataset.rows_outside_fold(held_out_fold)
    if not rows:
        raise ValidationError(f"no training rows outside fold {held_out_fold}")
    x = np.stack([r.vector for r in rows])
    y = np.array(
        [[1.0 if k in r.target else 0.0 for k in ELEMENT_KINDS] for r in rows]
    )
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    z = (x - mean) / scale
    n, d = z.shape
    w = np.zeros((d, len(ELEMENT_KINDS)))
    b = np.zeros(len(ELEMENT_KINDS))
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(z @ w + b)))
        grad_logits = (p - y) / n
        w -= lr * (z.T @ grad_logits + l2 * w)
        b -= lr * grad_logits.sum(axis=0)
    notes = tuple(
        f"head {kind.value}: single-class training targets"
        for j, kind in enumerate(ELEMENT_KINDS)
        if y[:, j].min() == y[:, j].max()
    )
    return ProbeModel(weights=w, bias=b, feature_mean=mean, feature_scale=scale, notes=notes)


def _to_na_sets(sets: Sequence[frozenset], na_mode: str):
    if na_mode == "empty_set":
        return list(sets), tuple(ELEMENT_KINDS)
    if na_mode == "fifth_label":
        converted = [s if s else frozenset({NA_LABEL}) for s in sets]
        return converted, tuple(ELEMENT_KINDS) + (NA_LABEL,)
    raise ValidationError(f"unknown na_mode {na_mode!r} (expected one of {NA_MODES})")


def _charge_fold_metrics(
    gold: Sequence[frozenset], pred: Sequence[frozenset], na_mode: str
) -> tuple[float, float, float]:
    gold_c, kinds = _to_na_sets(gold, na_mode)
    pred_c, _ = _to_na_sets(pred, na_mode)
    return metrics_mod.micro_prf(gold_c, pred_c, kinds)


def run_probing(
    bundle: ModelBundle,
    annotated_set: AnnotatedCaseSet,
    k: int = 5,
    seed: int = 0,
    na_mode: str = "empty_set",
    iters: int = 300,
) -> ProbeReport:
    """Full k-fold rotation; per-charge micro P/R/F1 averaged over folds."""
    dataset = extract_probe_dataset(bundle, annotated_set, k=k, seed=seed)
    charges = sorted({r.charge for r in dataset.rows})
    fold_scores: dict[str, list[tuple[float, float, float]]] = {c: [] for c in charges}
    count_rows: list[dict] = []
    for fold in range(k):
        model = train_probe(dataset, fold, iters=iters)
        held = dataset.rows_in_fold(fold)
        vectors = np.stack([r.vector for r in held])
        predicted = model.predict_sets(vectors)
        for charge in charges:
            idx = [i for i, r in enumerate(held) if r.charge == charge]
            if not idx:
                continue
            gold = [held[i].target for i in idx]
            pred = [predicted[i] for i in idx]
            fold_scores[charge].append(_charge_fold_metrics(gold, pred, na_mode))
            counts = metrics_mod.micro_counts(gold, pred, ELEMENT_KINDS)
            for kind in ELEMENT_KINDS:
                c = counts[kind]
                count_rows.append(
                    {
                        "charge": charge,
                        "fold": fold,
                        "element": kind.value,
                        "tp": c.tp,
                        "fp": c.fp,
                        "fn": c.fn,
                    }
                )
    per_charge = []
    for charge in charges:
        scores = fold_scores[charge]
        if not scores:
            raise ValidationError(f"charge {charge!r} never appeared in a held-out fold")
        p = float(np.mean([s[0] for s in scores]))
        r = float(np.mean([s[1] for s in scores]))
        f1 = float(np.mean([s[2] for s in scores]))
        per_charge.append(
            ChargeProbeMetrics(charge=charge, precision=p, recall=r, f1=f1, per_fold=tuple(scores))
        )
    return ProbeReport(
        per_charge=tuple(per_charge),
        macro_precision=float(np.mean([m.precision for m in per_charge])),
        macro_recall=float(np.mean([m.recall for m in per_charge])),
        macro_f1=float(np.mean([m.f1 for m in per_charge])),
        na_mode=na_mode,
        k=k,
        seed=seed,
        count_rows=tuple(count_rows),
    )


def element_frequencies(annotated_set: AnnotatedCaseSet) -> dict[ElementKind, float]:
    """Per-kind fraction of sentences carrying each element."""
    total = 0
    hits = {k: 0 for k in ELEMENT_KINDS}
    for entry in annotated_set:
        for label in entry.labels:
            total += 1
            for kind in label:
                hits[kind] += 1
    if total == 0:
        raise ValidationError("annotated set has no sentences")
    return {k: hits[k] / total for k in ELEMENT_KINDS}


def random_baseline(
    annotated_set: AnnotatedCaseSet,
    seed: int = 0,
    trials: int = 20,
    na_mode: str = "empty_set",
) -> ProbeReport:
    """Frequency-matched random assigner.

    Each element kind is sampled independently per sentence with its
    overall training frequency; per-charge micro metrics are averaged over
    ``trials`` resamplings.
    """
    if len(annotated_set) == 0:
        raise ValidationError("cannot baseline an empty annotated set")
    freqs = element_frequencies(annotated_set)
    rows = [
        (entry.case.charge, label) for entry in annotated_set for label in entry.labels
    ]
    charges = sorted({charge for charge, _ in rows})
    rng = np.random.default_rng(seed)
    fold_scores: dict[str, list[tuple[float, float, float]]] = {c: [] for c in charges}
    for _ in range(trials):
        draws = rng.random((len(rows), len(ELEMENT_KINDS)))
        predicted = [
            frozenset(
                kind
                for j, kind in enumerate(ELEMENT_KINDS)
                if draws[i, j] < freqs[kind]
            )
            for i in range(len(rows))
        ]
        for charge in charges:
            idx = [i for i, (c, _) in enumerate(rows) if c == charge]
            gold = [rows[i][1] for i in idx]
            pred = [predicted[i] for i in idx]
            fold_scores[charge].append(_charge_fold_metrics(gold, pred, na_mode))
    per_charge = []
    for charge in charges:
        scores = fold_scores[charge]
        per_charge.append(
            ChargeProbeMetrics(
                charge=charge,
                precision=float(np.mean([s[0] for s in scores])),
                recall=float(np.mean([s[1] for s in scores])),
                f1=float(np.mean([s[2] for s in scores])),
                per_fold=tuple(scores),
            )
        )
    return ProbeReport(
        per_charge=tuple(per_charge),
        macro_precision=float(np.mean([m.precision for m in per_charge])),
        macro_recall=float(np.mean([m.recall for m in per_charge])),
        macro_f1=float(np.mean([m.f1 for m in per_charge])),
        na_mode=na_mode,
        k=trials,
        seed=seed,
    )
