from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from fetaudit.corpus import (
    INNOCENT,
    AnnotatedCase,
    AnnotatedCaseSet,
    Case,
    CaseSet,
    ElementKind,
    SplitRatio,
    apportion,
    load_annotations,
    load_cases,
    merge_innocent,
    save_annotations,
    save_cases,
    segment_check,
    split_sentences,
    tokenize_text,
)
from fetaudit.errors import ParseError, SpecError, ValidationError
from fetaudit.synth import SynthSpec, default_synth_spec, generate_synthetic

from conftest import C, M, make_case


def write_jsonl(path, records):
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


GOOD_RECORDS = [
    {"id": "c1", "sentences": ["a b c", "d e"], "charge": "theft", "split": "train", "source": "criminal"},
    {"id": "c2", "sentences": ["f g"], "charge": "robbery", "split": "valid", "source": "criminal"},
    {"id": "c3", "sentences": ["h"], "charge": INNOCENT, "split": "test", "source": "innocent"},
]


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------

def test_load_cases_roundtrip_size(tmp_path):
    path = tmp_path / "cases.jsonl"
    write_jsonl(path, GOOD_RECORDS)
    caseset = load_cases(path)
    assert len(caseset) == 3
    assert caseset.charges == ("robbery", "theft")
    assert caseset.cases[0].sentences == (("a", "b", "c"), ("d", "e"))


def test_load_cases_missing_charge_names_line(tmp_path):
    path = tmp_path / "cases.jsonl"
    records = [GOOD_RECORDS[0], {k: v for k, v in GOOD_RECORDS[1].items() if k != "charge"}]
    write_jsonl(path, records)
    with pytest.raises(ParseError, match=":2"):
        load_cases(path)


def test_load_cases_duplicate_id(tmp_path):
    path = tmp_path / "cases.jsonl"
    write_jsonl(path, [GOOD_RECORDS[0], {**GOOD_RECORDS[1], "id": "c1"}])
    with pytest.raises(ValidationError, match="duplicate"):
        load_cases(path)


def test_load_cases_unknown_charge_with_closed_set(tmp_path):
    path = tmp_path / "cases.jsonl"
    write_jsonl(path, GOOD_RECORDS)
    with pytest.raises(ValidationError, match="robbery"):
        load_cases(path, charges=["theft"])


def test_load_cases_bad_json_line(tmp_path):
    path = tmp_path / "cases.jsonl"
    path.write_text('{"id": "c1"\n', encoding="utf-8")
    with pytest.raises(ParseError, match=":1"):
        load_cases(path)


def test_save_load_save_is_byte_identical(tmp_path):
    spec = default_synth_spec(cases_per_charge=5, innocent_fraction=0.2, seed=3)
    caseset, annotated = generate_synthetic(spec)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_cases(caseset, p1)
    save_cases(load_cases(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()
    a1, a2 = tmp_path / "ann_a.jsonl", tmp_path / "ann_b.jsonl"
    save_annotations(annotated, a1)
    save_annotations(load_annotations(a1, caseset), a2)
    assert a1.read_bytes() == a2.read_bytes()


def test_case_invariants():
    with pytest.raises(ValidationError):
        Case(id="x", sentences=(), charge="theft", split="train")
    with pytest.raises(ValidationError):
        Case(id="x", sentences=((),), charge="theft", split="train")
    with pytest.raises(ValidationError):
        Case(id="x", sentences=(("ok",),), charge="theft", split="nope")


# ---------------------------------------------------------------------------
# annotations
# ---------------------------------------------------------------------------

def test_load_annotations_happy_path(tmp_path):
    cases = tmp_path / "cases.jsonl"
    write_jsonl(cases, GOOD_RECORDS)
    caseset = load_cases(cases)
    ann = tmp_path / "ann.jsonl"
    write_jsonl(
        ann,
        [{"id": "c1", "labels": [["Conduct"], [], ["Subject", "MentalState"]][:2]}],
    )
    annotated = load_annotations(ann, caseset)
    assert len(annotated) == 1
    assert annotated.get("c1").labels == (frozenset({C}), frozenset())


def test_load_annotations_multilabel_sentence(tmp_path):
    cases = tmp_path / "cases.jsonl"
    write_jsonl(cases, [GOOD_RECORDS[1]])
    caseset = load_cases(cases)
    ann = tmp_path / "ann.jsonl"
    write_jsonl(ann, [{"id": "c2", "labels": [["Conduct", "MentalState"]]}])
    annotated = load_annotations(ann, caseset)
    assert annotated.get("c2").labels[0] == frozenset({C, M})


def test_load_annotations_length_mismatch(tmp_path):
    cases = tmp_path / "cases.jsonl"
    write_jsonl(cases, GOOD_RECORDS)
    caseset = load_cases(cases)
    ann = tmp_path / "ann.jsonl"
    write_jsonl(ann, [{"id": "c1", "labels": [["Conduct"]]}])  # c1 has 2 sentences
    with pytest.raises(ValidationError, match="label sets"):
        load_annotations(ann, caseset)


def test_load_annotations_unknown_element(tmp_path):
    cases = tmp_path / "cases.jsonl"
    write_jsonl(cases, GOOD_RECORDS)
    caseset = load_cases(cases)
    ann = tmp_path / "ann.jsonl"
    write_jsonl(ann, [{"id": "c2", "labels": [["Weapon"]]}])
    with pytest.raises(ValidationError, match="Weapon"):
        load_annotations(ann, caseset)


def test_load_annotations_unknown_case(tmp_path):
    cases = tmp_path / "cases.jsonl"
    write_jsonl(cases, GOOD_RECORDS)
    caseset = load_cases(cases)
    ann = tmp_path / "ann.jsonl"
    write_jsonl(ann, [{"id": "ghost", "labels": [["Conduct"]]}])
    with pytest.raises(ValidationError, match="ghost"):
        load_annotations(ann, caseset)


# ---------------------------------------------------------------------------
# innocent-case merging and apportionment
# ---------------------------------------------------------------------------

def innocent_set(count):
    cases = [
        make_case(f"inn-{i}", ["x y"], charge=INNOCENT, split="train", source="innocent")
        for i in range(count)
    ]
    return CaseSet.from_cases(cases)


def split_sizes(caseset, ids):
    out = {"train": 0, "valid": 0, "test": 0}
    for case in caseset:
        if case.id in ids:
            out[case.split] += 1
    return out


def test_merge_innocent_exact_proportion():
    base = CaseSet.from_cases([make_case("b1", ["a b"], charge="theft")])
    merged = merge_innocent(base, innocent_set(10), SplitRatio(5, 3, 2), seed=1)
    sizes = split_sizes(merged, {f"inn-{i}" for i in range(10)})
    assert sizes == {"train": 5, "valid": 3, "test": 2}


def test_merge_innocent_462_cases():
    # independent largest-remainder recount with exact fractions
    total, weights = 462, (5, 3, 2)
    exact = [Fraction(total * w, sum(weights)) for w in weights]
    floors = [int(x) for x in exact]
    rest = total - sum(floors)
    order = sorted(range(3), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[:rest]:
        floors[i] += 1
    assert tuple(floors) == (231, 139, 92)

    base = CaseSet.from_cases([make_case("b1", ["a b"], charge="theft")])
    merged = merge_innocent(base, innocent_set(462), SplitRatio(5, 3, 2), seed=9)
    sizes = split_sizes(merged, {f"inn-{i}" for i in range(462)})
    assert sizes == {"train": 231, "valid": 139, "test": 92}


def test_merge_innocent_empty_returns_base():
    base = CaseSet.from_cases([make_case("b1", ["a b"], charge="theft")])
    assert merge_innocent(base, innocent_set(0), seed=0) is base


def test_merge_innocent_rejects_guilty_cases():
    base = CaseSet.from_cases([make_case("b1", ["a b"], charge="theft")])
    bad = CaseSet.from_cases([make_case("g1", ["a b"], charge="theft")])
    with pytest.raises(ValidationError):
        merge_innocent(base, bad, seed=0)


def test_merge_innocent_base_untouched():
    base = CaseSet.from_cases([make_case("b1", ["a b"], charge="theft", split="test")])
    merged = merge_innocent(base, innocent_set(7), seed=4)
    assert merged.cases[0] == base.cases[0]
    assert len(merged) == 8


def test_merge_split_sizes_are_permutation_stable():
    base = CaseSet.from_cases([make_case("b1", ["a b"], charge="theft")])
    ids = {f"inn-{i}" for i in range(37)}
    reference = None
    for seed in (0, 1, 2):
        merged = merge_innocent(base, innocent_set(37), seed=seed)
        sizes = split_sizes(merged, ids)
        if reference is None:
            reference = sizes
        assert sizes == reference


def test_apportion_properties_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        count = int(rng.integers(0, 500))
        ratio = SplitRatio(*(int(x) for x in rng.integers(1, 9, 3)))
        parts = apportion(count, ratio)
        assert sum(parts) == count
        for part, weight in zip(parts, ratio.as_tuple()):
            assert abs(part - count * weight / ratio.total) < 1.0


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

def test_generate_all_elements_present():
    base = default_synth_spec()
    spec = SynthSpec(
        templates=base.templates[:2],
        pairs=(),
        cases_per_charge=10,
        innocent_fraction=0.0,
        noise_rate=0.0,
        seed=8,
    )
    caseset, annotated = generate_synthetic(spec)
    assert len(caseset) == 20
    for entry in annotated:
        assert entry.element_union == frozenset(ElementKind)


def test_generate_deterministic_bytes(tmp_path):
    spec = default_synth_spec(cases_per_charge=6, innocent_fraction=0.3, seed=99)
    for run in ("one", "two"):
        caseset, annotated = generate_synthetic(spec)
        save_cases(caseset, tmp_path / f"{run}.jsonl")
        save_annotations(annotated, tmp_path / f"{run}_ann.jsonl")
    assert (tmp_path / "one.jsonl").read_bytes() == (tmp_path / "two.jsonl").read_bytes()
    assert (tmp_path / "one_ann.jsonl").read_bytes() == (tmp_path / "two_ann.jsonl").read_bytes()


def test_generate_innocent_fraction_counts():
    base = default_synth_spec()
    spec = SynthSpec(
        templates=base.templates[:5],
        pairs=(),
        cases_per_charge=20,  # 100 guilty cases
        innocent_fraction=0.2,
        noise_rate=0.0,
        seed=12,
    )
    caseset, annotated = generate_synthetic(spec)
    innocents = [e for e in annotated if e.case.charge == INNOCENT]
    assert len(innocents) == 20
    for entry in innocents:
        assert entry.element_union < frozenset(ElementKind)  # strict subset
        assert len(entry.element_union) >= 1


def test_generate_union_property_random_specs():
    rng = np.random.default_rng(3)
    base = default_synth_spec()
    for _ in range(5):
        spec = SynthSpec(
            templates=base.templates,
            pairs=base.pairs,
            cases_per_charge=int(rng.integers(3, 9)),
            innocent_fraction=float(rng.uniform(0, 0.5)),
            noise_rate=float(rng.uniform(0, 0.3)),
            seed=int(rng.integers(0, 2**32)),
        )
        _, annotated = generate_synthetic(spec)
        for entry in annotated:
            if entry.case.charge == INNOCENT:
                assert entry.element_union < frozenset(ElementKind)
            else:
                assert entry.element_union == frozenset(ElementKind)


def test_spec_missing_element_pool_errors():
    base = default_synth_spec()
    tpl = base.templates[0]
    broken = type(tpl)(
        name=tpl.name,
        element_pools={k: v for k, v in tpl.element_pools.items() if k != C},
        filler_pool=tpl.filler_pool,
    )
    spec = SynthSpec(templates=(broken,), cases_per_charge=2, seed=0)
    with pytest.raises(SpecError, match="Conduct"):
        spec.validate()


def test_spec_json_roundtrip(tmp_path):
    spec = default_synth_spec(cases_per_charge=4, seed=5)
    path = tmp_path / "spec.json"
    spec.save_json(path)
    again = SynthSpec.from_json_file(path)
    assert again == spec


# ---------------------------------------------------------------------------
# segment check and text helpers
# ---------------------------------------------------------------------------

def test_segment_check_mean_tokens():
    caseset = CaseSet.from_cases([make_case("c1", ["a b c", "d e f g h"])])
    report = segment_check(caseset)
    assert report.mean_tokens_per_sentence == 4.0
    assert report.sentence_count == 2


def test_segment_check_empty():
    report = segment_check(CaseSet.from_cases([]))
    assert report.case_count == 0
    assert report.flagged == ()


def test_segment_check_sce_shaped_corpus():
    # 7 charges, 685 cases total, mirroring the annotated-subset shape
    per_charge = [100, 98, 99, 94, 100, 97, 97]
    cases = []
    for c, count in enumerate(per_charge):
        for i in range(count):
            cases.append(make_case(f"c{c}-{i}", ["w x"], charge=f"charge{c}"))
    report = segment_check(CaseSet.from_cases(cases))
    assert report.case_count == 685
    assert len(report.cases_per_charge) == 7


def test_segment_check_element_counts(small_corpus):
    caseset, annotated = small_corpus
    report = segment_check(caseset, annotated)
    row = report.element_sentence_counts["robbery"]
    assert set(row) == {"Sub", "Men", "Con", "Obj", "NA"}
    assert row["Con"] >= 12  # one conduct sentence per guilty case


def test_split_sentences_punctuation():
    assert split_sentences("他偷了钱。他逃跑了！Done.") == ["他偷了钱。", "他逃跑了！", "Done."]


def test_tokenize_text_modes():
    assert tokenize_text("the quick fox") == ["the", "quick", "fox"]
    assert tokenize_text("他偷了abc钱") == ["他", "偷", "了", "abc", "钱"]
