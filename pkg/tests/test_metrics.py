from __future__ import annotations

import numpy as np
import pytest

from fetaudit.metrics import (
    accuracy,
    cohen_kappa,
    confusion_counts,
    dist_summary,
    macro_prf,
    micro_counts,
    micro_prf,
)

# ---------------------------------------------------------------------------
# brute-force recounts used as independent oracles
# ---------------------------------------------------------------------------

def brute_macro(gold, pred, labels):
    per = []
    for label in labels:
        tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
        fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
        fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
        if tp + fn == 0:
            continue
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn)
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per.append((prec, rec, f1))
    k = len(per)
    return tuple(sum(x[i] for x in per) / k for i in range(3))


def brute_micro(gold_sets, pred_sets, kinds):
    tp = fp = fn = 0
    for g, p in zip(gold_sets, pred_sets):
        for kind in kinds:
            if kind in g and kind in p:
                tp += 1
            elif kind in p:
                fp += 1
            elif kind in g:
                fn += 1
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return prec, rec, f1


def brute_kappa(a, b):
    # recount the integers, then apply the definitional formula once
    n = len(a)
    agree = sum(1 for x, y in zip(a, b) if x == y)
    cross = sum(a.count(l) * b.count(l) for l in set(a) | set(b))
    po = agree / n
    pe = cross / (n * n)
    if cross == n * n:
        return 1.0
    return (po - pe) / (1 - pe)


# ---------------------------------------------------------------------------
# macro / accuracy
# ---------------------------------------------------------------------------

def test_macro_perfect_predictions():
    gold = ["a", "b", "c", "a"]
    assert macro_prf(gold, gold, ["a", "b", "c"]) == (1.0, 1.0, 1.0)


def test_macro_hand_confusion_case():
    gold = ["a", "a", "b", "b"]
    pred = ["a", "a", "a", "a"]
    p, r, f1 = macro_prf(gold, pred, ["a", "b"])
    assert accuracy(gold, pred) == 0.5
    # class a: P=0.5, R=1, F1=2/3; class b: all zero
    assert f1 == pytest.approx(1 / 3)
    assert p == pytest.approx(0.25)
    assert r == pytest.approx(0.5)


def test_macro_zero_prediction_label_contributes_zero():
    gold = ["a", "b"]
    pred = ["a", "a"]
    p, r, f1 = macro_prf(gold, pred, ["a", "b"])
    assert np.isfinite(p) and np.isfinite(r) and np.isfinite(f1)


def test_macro_empty_input_errors():
    with pytest.raises(ValueError):
        macro_prf([], [], ["a"])


def test_macro_excludes_unsupported_labels():
    gold = ["a", "a"]
    pred = ["a", "b"]
    p, r, f1 = macro_prf(gold, pred, ["a", "b", "zzz"])
    assert r == pytest.approx(0.5)  # only label a is averaged


# ---------------------------------------------------------------------------
# micro
# ---------------------------------------------------------------------------

def test_micro_single_match():
    assert micro_prf([{"Con"}], [{"Con"}], ["Sub", "Men", "Con", "Obj"]) == (1.0, 1.0, 1.0)


def test_micro_partial_recall():
    p, r, f1 = micro_prf([{"Con", "Men"}], [{"Con"}], ["Sub", "Men", "Con", "Obj"])
    assert (p, r) == (1.0, 0.5)
    assert f1 == pytest.approx(2 / 3)


def test_micro_all_empty_predictions():
    assert micro_prf([{"Con"}, {"Obj"}], [set(), set()], ["Con", "Obj"]) == (0.0, 0.0, 0.0)


def test_micro_empty_input_errors():
    with pytest.raises(ValueError):
        micro_prf([], [], ["Con"])


# ---------------------------------------------------------------------------
# kappa
# ---------------------------------------------------------------------------

def test_kappa_identical_sequences():
    report = cohen_kappa(["x", "y", "x"], ["x", "y", "x"])
    assert report.kappa == 1.0


def test_kappa_zero_case():
    report = cohen_kappa(["x", "x", "y", "y"], ["x", "y", "x", "y"])
    assert report.observed == 0.5
    assert report.expected == 0.5
    assert report.kappa == 0.0


def test_kappa_minus_one_case():
    report = cohen_kappa(["x", "y"], ["y", "x"])
    assert report.observed == 0.0
    assert report.expected == 0.5
    assert report.kappa == -1.0


def test_kappa_degenerate_full_agreement():
    report = cohen_kappa(["x", "x"], ["x", "x"])
    assert report.expected == 1.0
    assert report.kappa == 1.0


def test_kappa_length_mismatch():
    with pytest.raises(ValueError):
        cohen_kappa(["x"], ["x", "y"])


# ---------------------------------------------------------------------------
# distribution summary
# ---------------------------------------------------------------------------

def test_dist_summary_single_value():
    summary = dist_summary([0.5, 0.5])
    assert sum(1 for c in summary.histogram.counts if c) == 1
    # 0.5 sits in the right-closed bin ending at 0.50 (index 9)
    assert summary.histogram.counts[9] == 2
    five = summary.five_number
    assert five.as_tuple() == (0.5, 0.5, 0.5, 0.5, 0.5)


def test_dist_summary_quartiles_linear():
    five = dist_summary([0.0, 0.25, 0.5, 0.75, 1.0]).five_number
    assert five.q1 == 0.25
    assert five.median == 0.5
    assert five.q3 == 0.75


def test_dist_summary_top_bin_right_closed():
    summary = dist_summary([1.0])
    assert summary.histogram.counts[-1] == 1


def test_dist_summary_zero_in_bottom_bin():
    assert dist_summary([0.0]).histogram.counts[0] == 1


def test_dist_summary_bin_edges_are_exact():
    # values equal to an edge go into the bin that ends at that edge
    summary = dist_summary([0.15, 0.05, 0.1500000001])
    assert summary.histogram.counts[0] == 1
    assert summary.histogram.counts[2] == 1
    assert summary.histogram.counts[3] == 1


def test_dist_summary_errors():
    with pytest.raises(ValueError):
        dist_summary([])
    with pytest.raises(ValueError):
        dist_summary([1.2])
    with pytest.raises(ValueError):
        dist_summary([-0.1])


def test_dist_summary_counts_sum():
    rng = np.random.default_rng(0)
    values = rng.random(137)
    assert dist_summary(values).histogram.total == 137


def test_dist_summary_quartiles_match_sorting_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        values = rng.random(int(rng.integers(1, 60)))
        five = dist_summary(values).five_number
        ordered = np.sort(values)

        def rank_interp(q):
            pos = q * (len(ordered) - 1)
            lo = int(np.floor(pos))
            hi = int(np.ceil(pos))
            frac = pos - lo
            return ordered[lo] * (1 - frac) + ordered[hi] * frac

        assert five.q1 == pytest.approx(rank_interp(0.25))
        assert five.median == pytest.approx(rank_interp(0.5))
        assert five.q3 == pytest.approx(rank_interp(0.75))


# ---------------------------------------------------------------------------
# property tests against the brute-force oracles
# ---------------------------------------------------------------------------

def test_metrics_match_brute_force_on_random_instances():
    rng = np.random.default_rng(42)
    labels = ["a", "b", "c", "d"]
    kinds = ["Sub", "Men", "Con", "Obj"]
    for _ in range(60):
        n = int(rng.integers(1, 50))
        gold = [labels[i] for i in rng.integers(0, len(labels), n)]
        pred = [labels[i] for i in rng.integers(0, len(labels), n)]
        assert macro_prf(gold, pred, labels) == pytest.approx(
            brute_macro(gold, pred, labels)
        )
        gold_sets = [set(k for k in kinds if rng.random() < 0.4) for _ in range(n)]
        pred_sets = [set(k for k in kinds if rng.random() < 0.4) for _ in range(n)]
        assert micro_prf(gold_sets, pred_sets, kinds) == pytest.approx(
            brute_micro(gold_sets, pred_sets, kinds)
        )
        assert cohen_kappa(gold, pred).kappa == pytest.approx(brute_kappa(gold, pred))


def test_metrics_permutation_invariance():
    rng = np.random.default_rng(7)
    labels = ["a", "b", "c"]
    gold = [labels[i] for i in rng.integers(0, 3, 40)]
    pred = [labels[i] for i in rng.integers(0, 3, 40)]
    base_macro = macro_prf(gold, pred, labels)
    base_kappa = cohen_kappa(gold, pred).kappa
    for _ in range(5):
        order = rng.permutation(40)
        g2 = [gold[i] for i in order]
        p2 = [pred[i] for i in order]
        assert macro_prf(g2, p2, labels) == pytest.approx(base_macro)
        assert cohen_kappa(g2, p2).kappa == pytest.approx(base_kappa)


def test_confusion_counts_are_consistent():
    gold = ["a", "b", "a", "c"]
    pred = ["a", "a", "b", "c"]
    counts = confusion_counts(gold, pred, ["a", "b", "c"])
    for label, c in counts.items():
        assert c.tp + c.fp + c.fn + c.tn == 4
    assert counts["a"].tp == 1 and counts["a"].fp == 1 and counts["a"].fn == 1


def test_micro_counts_back_micro_prf():
    gold = [{"Con"}, {"Con", "Men"}, set()]
    pred = [{"Con"}, {"Men"}, {"Obj"}]
    counts = micro_counts(gold, pred, ["Sub", "Men", "Con", "Obj"])
    tp = sum(c.tp for c in counts.values())
    fp = sum(c.fp for c in counts.values())
    fn = sum(c.fn for c in counts.values())
    assert (tp, fp, fn) == (2, 1, 1)
