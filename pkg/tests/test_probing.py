from __future__ import annotations

import numpy as np
import pytest

from fetaudit.corpus import AnnotatedCase, AnnotatedCaseSet, ELEMENT_KINDS
from fetaudit.errors import StratificationError, ValidationError
from fetaudit.metrics import micro_prf
from fetaudit.models import (
    build_adapter_bundle,
    encoder_output_from_token_vectors,
    register_external_encoder,
)
from fetaudit.probing import (
    ProbeDataset,
    ProbeModel,
    ProbeRow,
    element_frequencies,
    extract_probe_dataset,
    random_baseline,
    run_probing,
    stratified_case_folds,
    train_probe,
)

from conftest import C, M, O, S, make_case


def annotated_from(label_rows, charges=None):
    """Build an AnnotatedCaseSet from per-case label lists."""
    entries = []
    for i, labels in enumerate(label_rows):
        charge = "theft" if charges is None else charges[i]
        sentences = [f"tok{i}x{j} tok{i}y{j}" for j in range(len(labels))]
        case = make_case(f"case-{i}", sentences, charge=charge)
        entries.append(AnnotatedCase(case=case, labels=tuple(frozenset(l) for l in labels)))
    return AnnotatedCaseSet(entries=tuple(entries))


class LabelAwareEncoder:
    """Vectors = [case-level noise | exact element one-hot]; the planted
    one-hot makes element kind perfectly linearly decodable."""

    def __init__(self, annotated, noise_dim=5, seed=0):
        self.labels = {e.case.id: e.labels for e in annotated}
        self.noise_dim = noise_dim
        self.rng = np.random.default_rng(seed)

    def encode(self, case):
        labels = self.labels[case.id]
        rows = []
        for sent, label in zip(case.sentences, labels):
            noise = self.rng.normal(size=self.noise_dim)
            onehot = np.array([1.0 if k in label else 0.0 for k in ELEMENT_KINDS])
            vector = np.concatenate([noise, onehot])
            rows.extend([vector] * len(sent))
        return encoder_output_from_token_vectors(case, np.array(rows))


class RandomEncoder:
    def __init__(self, dim=8, seed=3):
        self.dim = dim
        self.seed = seed

    def encode(self, case):
        rng = np.random.default_rng((hash(case.id) & 0xFFFF) + self.seed)
        rows = []
        for sent in case.sentences:
            vector = rng.normal(size=self.dim)
            rows.extend([vector] * len(sent))
        return encoder_output_from_token_vectors(case, np.array(rows))


# ---------------------------------------------------------------------------
# dataset extraction and folds
# ---------------------------------------------------------------------------

def test_extract_rows_and_fold_sizes(oracle_bundle, small_spec):
    labels = [[{C}, {S}, set()] for _ in range(10)]
    annotated = annotated_from(labels, charges=["forcible_seizure"] * 10)
    dataset = extract_probe_dataset(oracle_bundle, annotated, k=5, seed=1)
    assert len(dataset.rows) == 30
    fold_counts = {}
    for case_id, fold in dataset.fold_of_case.items():
        fold_counts[fold] = fold_counts.get(fold, 0) + 1
    assert sorted(fold_counts.values()) == [2, 2, 2, 2, 2]


def test_extract_fold_assignment_deterministic(oracle_bundle):
    labels = [[{C}, set()] for _ in range(12)]
    annotated = annotated_from(labels, charges=["robbery"] * 12)
    d1 = extract_probe_dataset(oracle_bundle, annotated, k=4, seed=9)
    d2 = extract_probe_dataset(oracle_bundle, annotated, k=4, seed=9)
    assert d1.fold_of_case == d2.fold_of_case


def test_extract_multilabel_sentence_row(oracle_bundle):
    annotated = annotated_from([[{C, M}], [{S}]] * 3, charges=["theft"] * 6)
    dataset = extract_probe_dataset(oracle_bundle, annotated, k=2, seed=0)
    targets = [row.target for row in dataset.rows]
    assert frozenset({C, M}) in targets


def test_fold_granularity_is_per_case(oracle_bundle):
    labels = [[{C}, {S}, {O}] for _ in range(8)]
    annotated = annotated_from(labels, charges=["theft"] * 8)
    dataset = extract_probe_dataset(oracle_bundle, annotated, k=4, seed=2)
    for row in dataset.rows:
        assert dataset.fold_of(row) == dataset.fold_of_case[row.case_id]


def test_fold_exhaustiveness(oracle_bundle):
    labels = [[{C}] for _ in range(10)]
    annotated = annotated_from(labels, charges=["theft"] * 10)
    dataset = extract_probe_dataset(oracle_bundle, annotated, k=5, seed=3)
    seen = []
    for fold in range(5):
        seen.extend(r.case_id for r in dataset.rows_in_fold(fold))
    assert sorted(seen) == sorted(r.case_id for r in dataset.rows)


def test_stratification_error_when_k_exceeds_charge_count():
    labels = [[{C}] for _ in range(6)]
    annotated = annotated_from(labels, charges=["theft"] * 3 + ["robbery"] * 3)
    with pytest.raises(StratificationError, match="robbery|theft"):
        stratified_case_folds(annotated, k=5, seed=0)


def test_stratified_folds_balance_within_charge_and_globally():
    labels = [[{C}] for _ in range(23)]
    annotated = annotated_from(labels, charges=["theft"] * 13 + ["robbery"] * 10)
    folds = stratified_case_folds(annotated, k=5, seed=4)
    total = [0] * 5
    for charge in ("theft", "robbery"):
        counts = [0] * 5
        for entry in annotated:
            if entry.case.charge == charge:
                counts[folds[entry.case.id]] += 1
        assert max(counts) - min(counts) <= 1
        total = [t + c for t, c in zip(total, counts)]
    assert max(total) - min(total) <= 1


# ---------------------------------------------------------------------------
# probe training
# ---------------------------------------------------------------------------

def planted_dataset(n_cases=40, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    fold_of_case = {}
    for i in range(n_cases):
        case_id = f"pc-{i}"
        fold_of_case[case_id] = i % 4
        for j in range(3):
            kind = ELEMENT_KINDS[int(rng.integers(0, 4))]
            onehot = np.array([3.0 if k is kind else -1.0 for k in ELEMENT_KINDS])
            vector = np.concatenate([rng.normal(size=4), onehot])
            rows.append(
                ProbeRow(
                    vector=vector,
                    target=frozenset({kind}),
                    charge="theft",
                    case_id=case_id,
                    sentence_index=j,
                )
            )
    return ProbeDataset(rows=tuple(rows), fold_of_case=fold_of_case, k=4)


def test_train_probe_on_linearly_decodable_signal():
    dataset = planted_dataset()
    model = train_probe(dataset, held_out_fold=0)
    held = dataset.rows_in_fold(0)
    predicted = model.predict_sets(np.stack([r.vector for r in held]))
    _, _, f1 = micro_prf([r.target for r in held], predicted, ELEMENT_KINDS)
    assert f1 >= 0.9


def test_train_probe_zero_vectors_fit_majority():
    # head probabilities converge to the base rates; only kinds with
    # rate > 0.5 fire, giving a closed-form micro score
    rows = []
    fold_of_case = {}
    rates = {ELEMENT_KINDS[0]: 0.8, ELEMENT_KINDS[1]: 0.2}
    n = 60
    for i in range(n):
        case_id = f"z-{i}"
        fold_of_case[case_id] = i % 3
        target = set()
        if i < int(rates[ELEMENT_KINDS[0]] * n):
            target.add(ELEMENT_KINDS[0])
        if i < int(rates[ELEMENT_KINDS[1]] * n):
            target.add(ELEMENT_KINDS[1])
        rows.append(
            ProbeRow(
                vector=np.zeros(5),
                target=frozenset(target),
                charge="theft",
                case_id=case_id,
                sentence_index=0,
            )
        )
    dataset = ProbeDataset(rows=tuple(rows), fold_of_case=fold_of_case, k=3)
    model = train_probe(dataset, held_out_fold=0, iters=500)
    held = dataset.rows_in_fold(0)
    predicted = model.predict_sets(np.stack([r.vector for r in held]))
    # majority rule: kind 0 (rate .8) always predicted, all others never
    for pred in predicted:
        assert pred == frozenset({ELEMENT_KINDS[0]})
    gold = [r.target for r in held]
    expected = micro_prf(gold, [frozenset({ELEMENT_KINDS[0]})] * len(gold), ELEMENT_KINDS)
    assert micro_prf(gold, predicted, ELEMENT_KINDS) == expected


def test_probe_threshold_is_strict():
    model = ProbeModel(
        weights=np.zeros((3, 4)),
        bias=np.zeros(4),
        feature_mean=np.zeros(3),
        feature_scale=np.ones(3),
    )
    predicted = model.predict_sets(np.zeros((2, 3)))  # sigmoid(0) == 0.5 exactly
    assert predicted == [frozenset(), frozenset()]


def test_train_probe_records_single_class_heads():
    rows = tuple(
        ProbeRow(
            vector=np.ones(3),
            target=frozenset({C}),
            charge="theft",
            case_id=f"s-{i}",
            sentence_index=0,
        )
        for i in range(8)
    )
    dataset = ProbeDataset(rows=rows, fold_of_case={f"s-{i}": i % 2 for i in range(8)}, k=2)
    model = train_probe(dataset, held_out_fold=0)
    assert any("single-class" in note for note in model.notes)


# ---------------------------------------------------------------------------
# full probing runs
# ---------------------------------------------------------------------------

def test_run_probing_oracle_encoder_is_perfect(oracle_bundle, small_corpus):
    _, annotated = small_corpus
    report = run_probing(oracle_bundle, annotated, k=5, seed=5)
    for m in report.per_charge:
        assert m.f1 == pytest.approx(1.0)
        assert m.precision == pytest.approx(1.0)
        assert m.recall == pytest.approx(1.0)


def test_run_probing_deterministic(oracle_bundle, small_corpus):
    _, annotated = small_corpus
    r1 = run_probing(oracle_bundle, annotated, k=5, seed=5)
    r2 = run_probing(oracle_bundle, annotated, k=5, seed=5)
    assert [(m.charge, m.f1) for m in r1.per_charge] == [
        (m.charge, m.f1) for m in r2.per_charge
    ]


def test_probing_leaves_bundle_parameters_untouched(tiny_bilstm_bundle, two_charge_corpus):
    caseset, annotated = two_charge_corpus
    before = {k: v.copy() for k, v in tiny_bilstm_bundle.params.items()}
    run_probing(tiny_bilstm_bundle, annotated, k=3, seed=1, iters=50)
    for name, value in tiny_bilstm_bundle.params.items():
        assert np.array_equal(value, before[name])


def test_monotone_decodability_with_planted_onehot():
    labels = [
        [{ELEMENT_KINDS[i % 4]}, {ELEMENT_KINDS[(i + 1) % 4]}, set()] for i in range(20)
    ]
    annotated = annotated_from(labels, charges=["theft"] * 10 + ["robbery"] * 10)
    tag = register_external_encoder(LabelAwareEncoder(annotated), tag="planted-onehot")
    bundle = build_adapter_bundle(tag, ("robbery", "theft", "INNOCENT"))
    report = run_probing(bundle, annotated, k=5, seed=2, iters=600)
    for m in report.per_charge:
        assert m.f1 == pytest.approx(1.0)


def test_constant_encoder_probe_matches_majority_closed_form():
    # constant vectors carry zero signal; the probe falls back to per-head
    # majority, whose micro score has a closed form from the label counts
    rng = np.random.default_rng(6)
    labels = []
    for _ in range(30):
        labels.append(
            [
                {ELEMENT_KINDS[int(rng.integers(0, 4))]} if rng.random() < 0.05 else set()
                for _ in range(6)
            ]
        )
    annotated = annotated_from(labels, charges=["theft"] * 15 + ["robbery"] * 15)

    class ConstantEncoder:
        def encode(self, case):
            return encoder_output_from_token_vectors(case, np.ones((case.num_tokens, 4)))

    tag = register_external_encoder(ConstantEncoder(), tag="const-probe")
    bundle = build_adapter_bundle(tag, ("robbery", "theft", "INNOCENT"))
    probe = run_probing(bundle, annotated, k=5, seed=1, iters=200)
    # all base rates < 0.5 -> majority rule predicts the empty set everywhere
    for m in probe.per_charge:
        assert m.f1 == 0.0 and m.precision == 0.0 and m.recall == 0.0
    baseline = random_baseline(annotated, seed=2, trials=30)
    for m in probe.per_charge:
        assert abs(m.f1 - baseline.charge_metrics(m.charge).f1) <= 0.05


def test_random_encoder_scores_near_chance():
    # rare elements: both the probe (majority rule -> empty set) and the
    # frequency-random baseline sit within 0.05 of each other
    rng = np.random.default_rng(12)
    labels = []
    for _ in range(40):
        labels.append(
            [
                {ELEMENT_KINDS[int(rng.integers(0, 4))]} if rng.random() < 0.04 else set()
                for _ in range(8)
            ]
        )
    annotated = annotated_from(labels, charges=["theft"] * 20 + ["robbery"] * 20)
    tag = register_external_encoder(RandomEncoder(), tag="random-enc")
    bundle = build_adapter_bundle(tag, ("robbery", "theft", "INNOCENT"))
    probe = run_probing(bundle, annotated, k=5, seed=3, iters=300)
    baseline = random_baseline(annotated, seed=4, trials=30)
    for m in probe.per_charge:
        b = baseline.charge_metrics(m.charge)
        assert abs(m.f1 - b.f1) <= 0.05


def test_probe_fold_metrics_match_count_rows(oracle_bundle, small_corpus):
    _, annotated = small_corpus
    report = run_probing(oracle_bundle, annotated, k=5, seed=5)
    # pooled counts per (charge, fold) must reproduce the fold micro scores
    pooled: dict[tuple, list[int]] = {}
    for row in report.count_rows:
        key = (row["charge"], row["fold"])
        agg = pooled.setdefault(key, [0, 0, 0])
        agg[0] += row["tp"]
        agg[1] += row["fp"]
        agg[2] += row["fn"]
    for m in report.per_charge:
        folds_seen = 0
        for fold_idx, (p, r, f1) in enumerate(m.per_fold):
            key = (m.charge, fold_idx)
            if key not in pooled:
                continue
            tp, fp, fn = pooled[key]
            exp_p = tp / (tp + fp) if tp + fp else 0.0
            exp_r = tp / (tp + fn) if tp + fn else 0.0
            assert p == pytest.approx(exp_p)
            assert r == pytest.approx(exp_r)
            folds_seen += 1
        assert folds_seen == len(m.per_fold)


def test_fifth_label_mode_counts_na():
    labels = [[set(), set(), {C}] for _ in range(10)]
    annotated = annotated_from(labels, charges=["theft"] * 10)
    baseline = random_baseline(annotated, seed=1, trials=5, na_mode="fifth_label")
    default = random_baseline(annotated, seed=1, trials=5, na_mode="empty_set")
    # counting NA as a positive class lifts the scores on an NA-heavy corpus
    assert baseline.per_charge[0].f1 > default.per_charge[0].f1


# ---------------------------------------------------------------------------
# random baseline
# ---------------------------------------------------------------------------

def test_random_baseline_degenerate_frequency():
    labels = [[{C}, {C}] for _ in range(10)]
    annotated = annotated_from(labels, charges=["theft"] * 10)
    report = random_baseline(annotated, seed=0, trials=5)
    m = report.per_charge[0]
    assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)


def test_random_baseline_matches_binomial_expectation():
    rng = np.random.default_rng(8)
    p = 0.35
    labels = [[({C} if rng.random() < p else set()) for _ in range(10)] for _ in range(40)]
    annotated = annotated_from(labels, charges=["theft"] * 40)
    freq = element_frequencies(annotated)[C]
    trials = 60
    report = random_baseline(annotated, seed=2, trials=trials)
    m = report.per_charge[0]
    per_trial_precision = np.array([t[0] for t in m.per_fold])
    per_trial_recall = np.array([t[1] for t in m.per_fold])
    for values, expectation in ((per_trial_precision, freq), (per_trial_recall, freq)):
        sigma = values.std(ddof=1) / np.sqrt(trials)
        assert abs(values.mean() - expectation) <= 3 * max(sigma, 1e-9) + 0.01


def test_random_baseline_empty_errors():
    with pytest.raises(ValidationError):
        random_baseline(AnnotatedCaseSet(entries=()), seed=0)
