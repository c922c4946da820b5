"""Case data model, JSONL ingestion/serialization and split plumbing.

Cases hold pre-segmented sentences; each sentence is stored as a token
tuple. On disk a sentence is a single whitespace-joined string, so files
written by :func:`save_cases` round-trip byte-identically through
:func:`load_cases`. Raw-text helpers (:func:`split_sentences`,
:func:`tokenize_text`) exist for preparing such files but ingestion itself
never re-segments anything.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import ParseError, ValidationError

INNOCENT = "INNOCENT"
SPLITS = ("train", "valid", "test")


class ElementKind(Enum):
    """The four criminal elements; no other kinds are constructible."""

    SUBJECT = "Subject"
    MENTAL_STATE = "MentalState"
    CONDUCT = "Conduct"
    OBJECT = "Object"

    @property
    def short(self) -> str:
        return _SHORT_NAMES[self]

    @classmethod
    def parse(cls, text: str) -> "ElementKind":
        try:
            return cls(text)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValidationError(f"unknown element kind {text!r} (expected one of {valid})")


_SHORT_NAMES = {
    ElementKind.SUBJECT: "Sub",
    ElementKind.MENTAL_STATE: "Men",
    ElementKind.CONDUCT: "Con",
    ElementKind.OBJECT: "Obj",
}

ELEMENT_KINDS: tuple[ElementKind, ...] = tuple(ElementKind)

ElementSet = frozenset  # frozenset[ElementKind]; the empty set encodes NA

Sentence = tuple[str, ...]


@dataclass(frozen=True)
class Case:
    """One legal case: ordered token-sequence sentences plus labels."""

    id: str
    sentences: tuple[Sentence, ...]
    charge: str
    split: str
    source: str = "criminal"

    def __post_init__(self):
        if not self.id:
            raise ValidationError("case id must be non-empty")
        if not self.sentences:
            raise ValidationError(f"case {self.id}: no sentences")
        for i, sent in enumerate(self.sentences):
            if len(sent) == 0:
                raise ValidationError(f"case {self.id}: sentence {i} is empty")
            for tok in sent:
                if not tok or any(ch.isspace() for ch in tok):
                    raise ValidationError(
                        f"case {self.id}: sentence {i} has an empty or "
                        f"whitespace-bearing token {tok!r}"
                    )
        if self.split not in SPLITS:
            raise ValidationError(f"case {self.id}: unknown split {self.split!r}")

    @property
    def tokens(self) -> tuple[str, ...]:
        """All tokens of the case in reading order."""
        return tuple(tok for sent in self.sentences for tok in sent)

    @property
    def num_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def sentence_ranges(self) -> tuple[tuple[int, int], ...]:
        """Half-open token index ranges of each sentence in the flat stream."""
        ranges = []
        start = 0
        for sent in self.sentences:
            ranges.append((start, start + len(sent)))
            start += len(sent)
        return tuple(ranges)


@dataclass(frozen=True)
class CaseSet:
    """Validated, ordered collection of cases over a closed charge set."""

    cases: tuple[Case, ...]
    charges: tuple[str, ...]

    def __post_init__(self):
        if tuple(sorted(set(self.charges))) != self.charges:
            raise ValidationError("charge set must be sorted and duplicate-free")
        if INNOCENT in self.charges:
            raise ValidationError(f"{INNOCENT} is implicit and must not be listed")
        allowed = set(self.charges) | {INNOCENT}
        seen: set[str] = set()
        for case in self.cases:
            if case.id in seen:
                raise ValidationError(f"duplicate case id {case.id!r}")
            seen.add(case.id)
            if case.charge not in allowed:
                raise ValidationError(
                    f"case {case.id}: unknown charge {case.charge!r} "
                    f"(charge set: {', '.join(self.charges) or '<empty>'})"
                )

    @classmethod
    def from_cases(cls, cases: Iterable[Case], charges: Iterable[str] | None = None) -> "CaseSet":
        cases = tuple(cases)
        if charges is None:
            charges = sorted({c.charge for c in cases} - {INNOCENT})
        return cls(cases=cases, charges=tuple(charges))

    @property
    def label_set(self) -> tuple[str, ...]:
        """Prediction label universe: the charge set plus INNOCENT, last."""
        return self.charges + (INNOCENT,)

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[Case]:
        return iter(self.cases)

    def get(self, case_id: str) -> Case:
        for case in self.cases:
            if case.id == case_id:
                return case
        raise KeyError(case_id)

    def by_split(self, *splits: str) -> "CaseSet":
        keep = set(splits)
        return CaseSet(
            cases=tuple(c for c in self.cases if c.split in keep), charges=self.charges
        )

    def by_charge(self, charge: str) -> tuple[Case, ...]:
        return tuple(c for c in self.cases if c.charge == charge)


@dataclass(frozen=True)
class AnnotatedCase:
    """A case plus one element set per sentence (empty set = NA)."""

    case: Case
    labels: tuple[frozenset, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.case.sentences):
            raise ValidationError(
                f"case {self.case.id}: {len(self.labels)} label sets for "
                f"{len(self.case.sentences)} sentences"
            )
        for i, label in enumerate(self.labels):
            for kind in label:
                if not isinstance(kind, ElementKind):
                    raise ValidationError(
                        f"case {self.case.id}: sentence {i} labeled with non-element {kind!r}"
                    )

    @property
    def element_union(self) -> frozenset:
        out: frozenset = frozenset()
        for label in self.labels:
            out = out | label
        return out


@dataclass(frozen=True)
class AnnotatedCaseSet:
    entries: tuple[AnnotatedCase, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for entry in self.entries:
            if entry.case.id in seen:
                raise ValidationError(f"duplicate annotation for case {entry.case.id!r}")
            seen.add(entry.case.id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[AnnotatedCase]:
        return iter(self.entries)

    def get(self, case_id: str) -> AnnotatedCase:
        for entry in self.entries:
            if entry.case.id == case_id:
                return entry
        raise KeyError(case_id)

    def ids(self) -> tuple[str, ...]:
        return tuple(e.case.id for e in self.entries)

    def charges(self) -> tuple[str, ...]:
        return tuple(sorted({e.case.charge for e in self.entries}))


@dataclass(frozen=True)
class SplitRatio:
    """Proportional train/valid/test weights, e.g. 5:3:2."""

    train: int
    valid: int
    test: int

    def __post_init__(self):
        for name, value in (("train", self.train), ("valid", self.valid), ("test", self.test)):
            if not isinstance(value, int) or value <= 0:
                raise ValidationError(f"split ratio {name} must be a positive integer")

    @property
    def total(self) -> int:
        return self.train + self.valid + self.test

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.train, self.valid, self.test)


DEFAULT_RATIO = SplitRatio(5, 3, 2)


def apportion(count: int, ratio: SplitRatio) -> tuple[int, int, int]:
    """Largest-remainder apportionment of ``count`` items over the ratio.

    Ties in the fractional remainders resolve in split order
    (train, valid, test), so the result is a pure function of
    (count, ratio).
    """
    if count < 0:
        raise ValidationError("cannot apportion a negative count")
    weights = ratio.as_tuple()
    exact = [count * w / ratio.total for w in weights]
    floors = [int(np.floor(x)) for x in exact]
    leftover = count - sum(floors)
    order = sorted(range(3), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[:leftover]:
        floors[i] += 1
    return tuple(floors)  # type: ignore[return-value]


def merge_innocent(
    base: CaseSet, innocent: CaseSet, ratio: SplitRatio = DEFAULT_RATIO, seed: int = 0
) -> CaseSet:
    """Append innocent cases to ``base`` with seeded split assignment.

    Innocent cases are shuffled by ``seed``, partitioned by
    largest-remainder apportionment on ``ratio`` and tagged train/valid/test
    in that order. Base cases are returned untouched.
    """
    for case in innocent:
        if case.charge != INNOCENT:
            raise ValidationError(
                f"case {case.id}: charge {case.charge!r} in innocent set (expected {INNOCENT})"
            )
    if len(innocent) == 0:
        return base
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(innocent))
    shuffled = [innocent.cases[i] for i in order]
    n_train, n_valid, n_test = apportion(len(shuffled), ratio)
    assigned = []
    bounds = (n_train, n_train + n_valid, n_train + n_valid + n_test)
    for i, case in enumerate(shuffled):
        if i < bounds[0]:
            split = "train"
        elif i < bounds[1]:
            split = "valid"
        else:
            split = "test"
        assigned.append(replace(case, split=split))
    return CaseSet(cases=base.cases + tuple(assigned), charges=base.charges)


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------

def _case_record(case: Case) -> dict:
    return {
        "id": case.id,
        "sentences": [" ".join(sent) for sent in case.sentences],
        "charge": case.charge,
        "split": case.split,
        "source": case.source,
    }


def _dump_record(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def save_cases(caseset: CaseSet, path: str | Path) -> None:
    """Write one canonical JSON record per line (UTF-8)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for case in caseset:
            fh.write(_dump_record(_case_record(case)) + "\n")


def load_cases(
    path: str | Path,
    format: str = "jsonl",
    charges: Iterable[str] | None = None,
) -> CaseSet:
    """Load and validate a case file.

    ``charges`` fixes the closed charge set; when omitted it is inferred
    from the file (all charge values except INNOCENT).
    """
    if format != "jsonl":
        raise ValidationError(f"unsupported case file format {format!r}")
    path = Path(path)
    cases = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
            if not isinstance(record, dict):
                raise ParseError(f"{path}:{lineno}: record is not an object")
            missing = [k for k in ("id", "sentences", "charge", "split") if k not in record]
            if missing:
                raise ParseError(f"{path}:{lineno}: missing field(s) {', '.join(missing)}")
            sentences = record["sentences"]
            if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
                raise ParseError(f"{path}:{lineno}: sentences must be a list of strings")
            try:
                case = Case(
                    id=str(record["id"]),
                    sentences=tuple(tuple(s.split()) for s in sentences),
                    charge=str(record["charge"]),
                    split=str(record["split"]),
                    source=str(record.get("source", "criminal")),
                )
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}")
            cases.append(case)
    return CaseSet.from_cases(cases, charges=charges)


def save_annotations(annotated: AnnotatedCaseSet, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for entry in annotated:
            record = {
                "id": entry.case.id,
                "labels": [
                    [k.value for k in ELEMENT_KINDS if k in label] for label in entry.labels
                ],
            }
            fh.write(_dump_record(record) + "\n")


def load_annotations(path: str | Path, caseset: CaseSet) -> AnnotatedCaseSet:
    """Attach per-sentence element labels to cases of ``caseset``.

    Every record must reference an existing case id and carry exactly one
    label list per sentence of that case.
    """
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.open("r", encoding="utf-8"), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
        if "id" not in record or "labels" not in record:
            raise ParseError(f"{path}:{lineno}: missing field(s)")
        try:
            case = caseset.get(str(record["id"]))
        except KeyError:
            raise ValidationError(f"{path}:{lineno}: unknown case id {record['id']!r}")
        raw_labels = record["labels"]
        if not isinstance(raw_labels, list):
            raise ParseError(f"{path}:{lineno}: labels must be a list of lists")
        if len(raw_labels) != len(case.sentences):
            raise ValidationError(
                f"{path}:{lineno}: case {case.id} has {len(case.sentences)} sentences "
                f"but {len(raw_labels)} label sets"
            )
        labels = []
        for raw in raw_labels:
            if not isinstance(raw, list):
                raise ParseError(f"{path}:{lineno}: each label entry must be a list")
            try:
                labels.append(frozenset(ElementKind.parse(item) for item in raw))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}")
        entries.append(AnnotatedCase(case=case, labels=tuple(labels)))
    return AnnotatedCaseSet(entries=tuple(entries))


# ---------------------------------------------------------------------------
# Corpus report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentReport:
    case_count: int
    sentence_count: int
    token_count: int
    mean_sentences_per_case: float
    mean_tokens_per_sentence: float
    min_tokens_per_sentence: int
    max_tokens_per_sentence: int
    cases_per_charge: Mapping[str, int]
    cases_per_split: Mapping[str, int]
    element_sentence_counts: Mapping[str, Mapping[str, int]] | None
    flagged: tuple[str, ...]


def segment_check(
    caseset: CaseSet, annotations: AnnotatedCaseSet | None = None
) -> SegmentReport:
    """Report sentence/token count distributions and per-charge totals.

    With annotations, adds per-charge sentence counts for each element kind
    plus NA. Report-only: nothing is raised.
    """
    lengths = [len(sent) for case in caseset for sent in case.sentences]
    per_charge = Counter(case.charge for case in caseset)
    per_split = Counter(case.split for case in caseset)
    flagged = tuple(
        f"{case.id}: sentence {i} empty"
        for case in caseset
        for i, sent in enumerate(case.sentences)
        if len(sent) == 0
    )
    element_counts = None
    if annotations is not None:
        element_counts = {}
        for entry in annotations:
            row = element_counts.setdefault(
                entry.case.charge, {k.short: 0 for k in ELEMENT_KINDS} | {"NA": 0}
            )
            for label in entry.labels:
                if not label:
                    row["NA"] += 1
                else:
                    for kind in label:
                        row[kind.short] += 1
    return SegmentReport(
        case_count=len(caseset),
        sentence_count=len(lengths),
        token_count=sum(lengths),
        mean_sentences_per_case=(len(lengths) / len(caseset)) if len(caseset) else 0.0,
        mean_tokens_per_sentence=(sum(lengths) / len(lengths)) if lengths else 0.0,
        min_tokens_per_sentence=min(lengths) if lengths else 0,
        max_tokens_per_sentence=max(lengths) if lengths else 0,
        cases_per_charge=dict(sorted(per_charge.items())),
        cases_per_split={s: per_split.get(s, 0) for s in SPLITS},
        element_sentence_counts=element_counts,
        flagged=flagged,
    )


# ---------------------------------------------------------------------------
# Raw-text convenience helpers
# ---------------------------------------------------------------------------

_SENTENCE_BOUNDARY = re.compile(r"(?<=[。！？.!?])")
_CJK = re.compile(r"[㐀-鿿豈-﫿]")


def split_sentences(text: str) -> list[str]:
    """Split raw text on sentence-final punctuation (。！？.!?)."""
    parts = [p.strip() for p in _SENTENCE_BOUNDARY.split(text)]
    return [p for p in parts if p]


def tokenize_text(text: str) -> list[str]:
    """Character tokens for CJK runs, whitespace tokens otherwise."""
    if not _CJK.search(text):
        return text.split()
    tokens: list[str] = []
    for chunk in text.split():
        buffer = ""
        for ch in chunk:
            if _CJK.match(ch):
                if buffer:
                    tokens.append(buffer)
                    buffer = ""
                tokens.append(ch)
            else:
                buffer += ch
        if buffer:
            tokens.append(buffer)
    return tokens
