"""Synthetic planted-signal corpus generation.

Stands in for closed real-world charge corpora at desk scale. Each charge
template supplies one phrase pool per criminal element plus a filler pool;
every guilty case gets one sentence per element (labeled with that
element), innocent cases get a strict subset of elements, and fillers are
labeled NA. Ground-truth annotations are therefore exact by construction.

Confusing charge pairs are built so that the target charge's differing
element reads like the source's phrasing with a distinctive circumstance
appended. The common circumstance is the only feature separating the two
charges in training data, while the uncommon one never occurs in any pool,
which is what the sensitivity audit exploits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import (
    INNOCENT,
    AnnotatedCase,
    AnnotatedCaseSet,
    Case,
    CaseSet,
    DEFAULT_RATIO,
    ELEMENT_KINDS,
    ElementKind,
    SplitRatio,
    apportion,
)
from .errors import SpecError


def _tokens(phrase: str) -> tuple[str, ...]:
    return tuple(phrase.split())


def contains_phrase(tokens: Sequence[str], phrase_tokens: Sequence[str]) -> bool:
    """True when ``phrase_tokens`` occurs contiguously inside ``tokens``."""
    n, m = len(tokens), len(phrase_tokens)
    if m == 0 or m > n:
        return False
    first = phrase_tokens[0]
    for start in range(n - m + 1):
        if tokens[start] == first and tuple(tokens[start : start + m]) == tuple(phrase_tokens):
            return True
    return False


@dataclass(frozen=True)
class ChargeTemplate:
    """Phrase pools for one charge: one pool per element plus fillers.

    ``severity`` orders charges when several are simultaneously satisfied;
    aggravated variants of a confusing pair carry the higher rank.
    """

    name: str
    element_pools: Mapping[ElementKind, tuple[str, ...]]
    filler_pool: tuple[str, ...]
    severity: int = 0


@dataclass(frozen=True)
class ConfusingPair:
    """Two charges differing in exactly one element, plus the two
    circumstances that realize the difference in text."""

    source: str
    target: str
    element: ElementKind
    knowledge: str
    common: str
    uncommon: str


@dataclass(frozen=True)
class SynthSpec:
    templates: tuple[ChargeTemplate, ...]
    pairs: tuple[ConfusingPair, ...] = ()
    cases_per_charge: int = 50
    innocent_fraction: float = 0.0
    noise_rate: float = 0.0
    seed: int = 0
    split_ratio: SplitRatio = DEFAULT_RATIO
    filler_sentence_range: tuple[int, int] = (1, 2)

    def template(self, name: str) -> ChargeTemplate:
        for tpl in self.templates:
            if tpl.name == name:
                return tpl
        raise SpecError(f"no template for charge {name!r}")

    @property
    def charge_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.templates)

    def validate(self) -> None:
        if not self.templates:
            raise SpecError("spec has no charge templates")
        if self.cases_per_charge < 1:
            raise SpecError("cases_per_charge must be >= 1")
        if not 0.0 <= self.innocent_fraction <= 1.0:
            raise SpecError("innocent_fraction must lie in [0, 1]")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise SpecError("noise_rate must lie in [0, 1]")
        lo, hi = self.filler_sentence_range
        if lo < 0 or hi < lo:
            raise SpecError("filler_sentence_range must be 0 <= lo <= hi")
        names = [t.name for t in self.templates]
        if len(set(names)) != len(names):
            raise SpecError("duplicate charge template names")
        for tpl in self.templates:
            for kind in ELEMENT_KINDS:
                pool = tpl.element_pools.get(kind, ())
                if not pool or any(not p.split() for p in pool):
                    raise SpecError(
                        f"template {tpl.name!r} is missing phrases for element {kind.value}"
                    )
            if self.noise_rate > 0.0 and not tpl.filler_pool:
                raise SpecError(
                    f"template {tpl.name!r} needs a filler pool when noise_rate > 0"
                )
            if self.filler_sentence_range[1] > 0 and not tpl.filler_pool:
                raise SpecError(f"template {tpl.name!r} needs a filler pool")
        for pair in self.pairs:
            self.template(pair.source)
            self.template(pair.target)
            if pair.source == pair.target:
                raise SpecError(f"pair {pair.source!r} maps a charge onto itself")
            if not pair.common.split() or not pair.uncommon.split():
                raise SpecError("pair circumstances must be non-empty")
        self._validate_marker_exactness()

    def _validate_marker_exactness(self) -> None:
        """Cross-kind phrase containment would break label exactness."""
        by_kind: dict[ElementKind, set[tuple[str, ...]]] = {k: set() for k in ELEMENT_KINDS}
        for tpl in self.templates:
            for kind in ELEMENT_KINDS:
                by_kind[kind].update(_tokens(p) for p in tpl.element_pools[kind])
        for pair in self.pairs:
            by_kind[pair.element].add(_tokens(pair.common))
            by_kind[pair.element].add(_tokens(pair.uncommon))
        fillers = {
            _tokens(p) for tpl in self.templates for p in tpl.filler_pool
        }
        kinds = list(by_kind)
        for i, kind_a in enumerate(kinds):
            for kind_b in kinds[i + 1 :]:
                for pa in by_kind[kind_a]:
                    for pb in by_kind[kind_b]:
                        if contains_phrase(pa, pb) or contains_phrase(pb, pa):
                            raise SpecError(
                                f"phrase overlap between {kind_a.value} and {kind_b.value}: "
                                f"{' '.join(pa)!r} vs {' '.join(pb)!r}"
                            )
        for filler in fillers:
            for kind in kinds:
                for phrase in by_kind[kind]:
                    if contains_phrase(filler, phrase) or contains_phrase(phrase, filler):
                        raise SpecError(
                            f"filler phrase {' '.join(filler)!r} overlaps a "
                            f"{kind.value} phrase"
                        )
        for pair in self.pairs:
            unc = _tokens(pair.uncommon)
            for kind in kinds:
                for phrase in by_kind[kind]:
                    if phrase == unc:
                        continue
                    if contains_phrase(phrase, unc):
                        raise SpecError(
                            f"uncommon circumstance {pair.uncommon!r} occurs in a "
                            "training pool; it must stay unseen"
                        )

    # -- JSON round trip ----------------------------------------------------
    def to_json_dict(self) -> dict:
        return {
            "templates": [
                {
                    "name": t.name,
                    "elements": {k.value: list(t.element_pools[k]) for k in ELEMENT_KINDS},
                    "filler": list(t.filler_pool),
                    "severity": t.severity,
                }
                for t in self.templates
            ],
            "pairs": [
                {
                    "source": p.source,
                    "target": p.target,
                    "element": p.element.value,
                    "knowledge": p.knowledge,
                    "common": p.common,
                    "uncommon": p.uncommon,
                }
                for p in self.pairs
            ],
            "cases_per_charge": self.cases_per_charge,
            "innocent_fraction": self.innocent_fraction,
            "noise_rate": self.noise_rate,
            "seed": self.seed,
            "split_ratio": list(self.split_ratio.as_tuple()),
            "filler_sentence_range": list(self.filler_sentence_range),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "SynthSpec":
        try:
            templates = tuple(
                ChargeTemplate(
                    name=t["name"],
                    element_pools={
                        ElementKind(k): tuple(v) for k, v in t["elements"].items()
                    },
                    filler_pool=tuple(t.get("filler", ())),
                    severity=int(t.get("severity", 0)),
                )
                for t in data["templates"]
            )
            pairs = tuple(
                ConfusingPair(
                    source=p["source"],
                    target=p["target"],
                    element=ElementKind(p["element"]),
                    knowledge=p["knowledge"],
                    common=p["common"],
                    uncommon=p["uncommon"],
                )
                for p in data.get("pairs", ())
            )
            ratio = data.get("split_ratio", [5, 3, 2])
            spec = cls(
                templates=templates,
                pairs=pairs,
                cases_per_charge=int(data["cases_per_charge"]),
                innocent_fraction=float(data.get("innocent_fraction", 0.0)),
                noise_rate=float(data.get("noise_rate", 0.0)),
                seed=int(data["seed"]),
                split_ratio=SplitRatio(*[int(x) for x in ratio]),
                filler_sentence_range=tuple(
                    int(x) for x in data.get("filler_sentence_range", (1, 2))
                ),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise SpecError(f"malformed synthetic spec: {exc}")
        spec.validate()
        return spec

    @classmethod
    def from_json_file(cls, path: str | Path) -> "SynthSpec":
        with Path(path).open("r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def save_json(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def _split_for_index(i: int, bounds: tuple[int, int]) -> str:
    if i < bounds[0]:
        return "train"
    if i < bounds[1]:
        return "valid"
    return "test"


def _noise_suffix(rng: np.random.Generator, spec: SynthSpec, tpl: ChargeTemplate) -> tuple[str, ...]:
    if spec.noise_rate <= 0.0 or rng.random() >= spec.noise_rate:
        return ()
    vocab = sorted({tok for phrase in tpl.filler_pool for tok in phrase.split()})
    count = int(rng.integers(1, 3))
    return tuple(vocab[int(rng.integers(0, len(vocab)))] for _ in range(count))


def _build_sentences(
    rng: np.random.Generator,
    spec: SynthSpec,
    tpl: ChargeTemplate,
    kinds: Sequence[ElementKind],
) -> tuple[tuple[tuple[str, ...], ...], tuple[frozenset, ...]]:
    drafts: list[tuple[tuple[str, ...], frozenset]] = []
    for kind in kinds:
        pool = tpl.element_pools[kind]
        phrase = pool[int(rng.integers(0, len(pool)))]
        tokens = _tokens(phrase) + _noise_suffix(rng, spec, tpl)
        drafts.append((tokens, frozenset({kind})))
    lo, hi = spec.filler_sentence_range
    n_filler = int(rng.integers(lo, hi + 1)) if hi > 0 else 0
    for _ in range(n_filler):
        phrase = tpl.filler_pool[int(rng.integers(0, len(tpl.filler_pool)))]
        drafts.append((_tokens(phrase), frozenset()))
    order = rng.permutation(len(drafts))
    sentences = tuple(drafts[i][0] for i in order)
    labels = tuple(drafts[i][1] for i in order)
    return sentences, labels


def generate_synthetic(spec: SynthSpec) -> tuple[CaseSet, AnnotatedCaseSet]:
    """Deterministically generate a labeled corpus from ``spec``.

    Guilty cases carry one sentence per element kind (all four present);
    innocent cases carry a non-empty strict subset of kinds. Splits are
    apportioned per charge by the spec's ratio.
    """
    spec.validate()
    rng = np.random.default_rng(np.uint64(spec.seed))
    cases: list[Case] = []
    annotations: list[AnnotatedCase] = []

    for tpl in spec.templates:
        n_train, n_valid, n_test = apportion(spec.cases_per_charge, spec.split_ratio)
        bounds = (n_train, n_train + n_valid)
        for i in range(spec.cases_per_charge):
            sentences, labels = _build_sentences(rng, spec, tpl, ELEMENT_KINDS)
            case = Case(
                id=f"syn-{tpl.name}-{i:04d}",
                sentences=sentences,
                charge=tpl.name,
                split=_split_for_index(i, bounds),
                source="synthetic",
            )
            cases.append(case)
            annotations.append(AnnotatedCase(case=case, labels=labels))

    n_guilty = len(cases)
    n_innocent = int(n_guilty * spec.innocent_fraction + 0.5)
    if n_innocent:
        n_train, n_valid, _ = apportion(n_innocent, spec.split_ratio)
        bounds = (n_train, n_train + n_valid)
        for i in range(n_innocent):
            tpl = spec.templates[int(rng.integers(0, len(spec.templates)))]
            subset_size = int(rng.integers(1, len(ELEMENT_KINDS)))
            picked = rng.choice(len(ELEMENT_KINDS), size=subset_size, replace=False)
            kinds = [ELEMENT_KINDS[j] for j in sorted(picked)]
            sentences, labels = _build_sentences(rng, spec, tpl, kinds)
            case = Case(
                id=f"syn-innocent-{i:04d}",
                sentences=sentences,
                charge=INNOCENT,
                split=_split_for_index(i, bounds),
                source="synthetic",
            )
            cases.append(case)
            annotations.append(AnnotatedCase(case=case, labels=labels))

    caseset = CaseSet.from_cases(cases, charges=sorted(spec.charge_names))
    return caseset, AnnotatedCaseSet(entries=tuple(annotations))


# ---------------------------------------------------------------------------
# built-in spec
# ---------------------------------------------------------------------------

_FILLER = (
    "records were filed later",
    "witnesses recalled the date",
    "the weather stayed mild",
    "paperwork followed next morning",
)

_PROPERTY_SUBJECT = (
    "grown trader acting alone",
    "adult vendor aged thirty",
    "seasoned porter of sound mind",
)
_PROPERTY_MENTAL = (
    "meaning to pocket gains unlawfully",
    "craving quick illicit profit",
    "resolved on wrongful enrichment",
)
_PROPERTY_OBJECT = (
    "private belongings of passersby",
    "personal valuables carried nearby",
    "household property left unattended",
)
_SEIZURE_CONDUCT = (
    "snatched her handbag and fled",
    "grabbed his satchel in passing",
    "wrenched away a shopping sack",
)
_THEFT_CONDUCT = (
    "slipped out a wallet unnoticed",
    "pried open a locker quietly",
    "pocketed a phone unseen",
)
_SEIZURE_COMMON = "brandishing one steel knife"
_SEIZURE_UNCOMMON = "hefting twin oak cudgels"
_THEFT_COMMON = "spraying pepper mist at guards"
_THEFT_UNCOMMON = "jabbing chasers using folding blade"

_ROAD_SUBJECT = (
    "licensed driver employed steadily",
    "veteran motorist on duty",
    "commercial chauffeur mid shift",
)
_ROAD_MENTAL = (
    "careless beyond reasonable caution",
    "inattentive despite clear warnings",
    "negligent about obvious hazards",
)
_ROAD_CONDUCT = (
    "sped through rainfall striking someone",
    "drifted across lanes hitting walkers",
    "reversed blindly over bystanders",
)
_ROAD_OBJECT = (
    "public roadway transit safety",
    "orderly highway traffic circulation",
)
_ROAD_COMMON = "inside closed construction zone"
_ROAD_UNCOMMON = "along drained canal embankment"


def _combined(pool: tuple[str, ...], circumstance: str) -> tuple[str, ...]:
    return tuple(f"{p} {circumstance}" for p in pool)


def default_synth_spec(
    cases_per_charge: int = 50,
    innocent_fraction: float = 0.25,
    noise_rate: float = 0.15,
    seed: int = 20240501,
) -> SynthSpec:
    """Eight synthetic charges mirroring hard-to-distinguish offence
    families, with three confusing pairs wired for the sensitivity audit."""
    templates = (
        ChargeTemplate(
            name="traffic_accident",
            element_pools={
                ElementKind.SUBJECT: _ROAD_SUBJECT,
                ElementKind.MENTAL_STATE: _ROAD_MENTAL,
                ElementKind.CONDUCT: _ROAD_CONDUCT,
                ElementKind.OBJECT: _ROAD_OBJECT,
            },
            filler_pool=_FILLER,
            severity=0,
        ),
        ChargeTemplate(
            name="negligent_homicide",
            element_pools={
                ElementKind.SUBJECT: _ROAD_SUBJECT,
                ElementKind.MENTAL_STATE: _ROAD_MENTAL,
                ElementKind.CONDUCT: _ROAD_CONDUCT,
                ElementKind.OBJECT: _combined(_ROAD_OBJECT, _ROAD_COMMON),
            },
            filler_pool=_FILLER,
            severity=1,
        ),
        ChargeTemplate(
            name="forcible_seizure",
            element_pools={
                ElementKind.SUBJECT: _PROPERTY_SUBJECT,
                ElementKind.MENTAL_STATE: _PROPERTY_MENTAL,
                ElementKind.CONDUCT: _SEIZURE_CONDUCT,
                ElementKind.OBJECT: _PROPERTY_OBJECT,
            },
            filler_pool=_FILLER,
            severity=0,
        ),
        ChargeTemplate(
            name="theft",
            element_pools={
                ElementKind.SUBJECT: _PROPERTY_SUBJECT,
                ElementKind.MENTAL_STATE: _PROPERTY_MENTAL,
                ElementKind.CONDUCT: _THEFT_CONDUCT,
                ElementKind.OBJECT: _PROPERTY_OBJECT,
            },
            filler_pool=_FILLER,
            severity=0,
        ),
        ChargeTemplate(
            name="robbery",
            element_pools={
                ElementKind.SUBJECT: _PROPERTY_SUBJECT,
                ElementKind.MENTAL_STATE: _PROPERTY_MENTAL,
                ElementKind.CONDUCT: _combined(_SEIZURE_CONDUCT, _SEIZURE_COMMON)
                + _combined(_THEFT_CONDUCT, _THEFT_COMMON),
                ElementKind.OBJECT: _PROPERTY_OBJECT,
            },
            filler_pool=_FILLER,
            severity=1,
        ),
        ChargeTemplate(
            name="corruption",
            element_pools={
                ElementKind.SUBJECT: (
                    "entrusted state cadre ranking highly",
                    "appointed bureau director holding office",
                ),
                ElementKind.MENTAL_STATE: (
                    "bent on trading favors covertly",
                    "set upon converting influence into wealth",
                ),
                ElementKind.CONDUCT: (
                    "took bribes granting contracts",
                    "accepted envelopes approving permits",
                ),
                ElementKind.OBJECT: (
                    "integrity of official duties",
                    "impartial exercise of authority",
                ),
            },
            filler_pool=_FILLER,
            severity=0,
        ),
        ChargeTemplate(
            name="fund_misuse",
            element_pools={
                ElementKind.SUBJECT: (
                    "company treasurer holding ledger keys",
                    "corporate accountant managing books",
                ),
                ElementKind.MENTAL_STATE: (
                    "intending to divert balances temporarily",
                    "hoping to ride markets briefly",
                ),
                ElementKind.CONDUCT: (
                    "moved client deposits into equities",
                    "channeled firm cash to private lending",
                ),
                ElementKind.OBJECT: (
                    "capital reserves of the employer",
                    "corporate operating funds",
                ),
            },
            filler_pool=_FILLER,
            severity=0,
        ),
        ChargeTemplate(
            name="public_fund_misuse",
            element_pools={
                ElementKind.SUBJECT: (
                    "municipal cashier overseeing budgets",
                    "township clerk disbursing allocations",
                ),
                ElementKind.MENTAL_STATE: (
                    "planning short personal borrowing",
                    "expecting repayment before audits",
                ),
                ElementKind.CONDUCT: (
                    "shifted treasury money toward ventures",
                    "redirected grant balances for resale goods",
                ),
                ElementKind.OBJECT: (
                    "public fiscal allocations",
                    "state budget appropriations",
                ),
            },
            filler_pool=_FILLER,
            severity=0,
        ),
    )
    pairs = (
        ConfusingPair(
            source="forcible_seizure",
            target="robbery",
            element=ElementKind.CONDUCT,
            knowledge="armed with a weapon",
            common=_SEIZURE_COMMON,
            uncommon=_SEIZURE_UNCOMMON,
        ),
        ConfusingPair(
            source="theft",
            target="robbery",
            element=ElementKind.CONDUCT,
            knowledge="using violence against pursuers",
            common=_THEFT_COMMON,
            uncommon=_THEFT_UNCOMMON,
        ),
        ConfusingPair(
            source="traffic_accident",
            target="negligent_homicide",
            element=ElementKind.OBJECT,
            knowledge="on a non-public transport road",
            common=_ROAD_COMMON,
            uncommon=_ROAD_UNCOMMON,
        ),
    )
    spec = SynthSpec(
        templates=templates,
        pairs=pairs,
        cases_per_charge=cases_per_charge,
        innocent_fraction=innocent_fraction,
        noise_rate=noise_rate,
        seed=seed,
    )
    spec.validate()
    return spec
