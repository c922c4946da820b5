"""Sensitivity audit: confusing-charge perturbation.

A perturbation rule rewrites facts of a source charge so they satisfy a
confusing target charge, by inserting a circumstance phrase that realizes
the one differing criminal element. Each piece of legal knowledge ships
two circumstances, a common and an uncommon one, so pattern memorization
(reacting to the common phrasing only) is distinguishable from learned
legal knowledge. The retention ratio is the fraction of perturbed cases
for which a model still predicts the source charge.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import AnnotatedCase, AnnotatedCaseSet, Case, CaseSet, ElementKind
from .errors import ParseError, ValidationError
from .models import ModelBundle, predict_batch
from .synth import SynthSpec, default_synth_spec

COMMONALITIES = ("common", "uncommon")
ANCHORS = ("conduct_sentence", "append_end")


@dataclass(frozen=True)
class PerturbationRule:
    source: str
    target: str
    knowledge: str
    circumstance: str
    commonality: str
    anchor: str = "conduct_sentence"
    gloss: str | None = None

    def __post_init__(self):
        if self.source == self.target:
            raise ValidationError("rule source and target must differ")
        if not self.circumstance.split():
            raise ValidationError("rule circumstance must be non-empty")
        if self.commonality not in COMMONALITIES:
            raise ValidationError(f"commonality must be one of {COMMONALITIES}")
        if self.anchor not in ANCHORS:
            raise ValidationError(f"anchor must be one of {ANCHORS}")

    @property
    def circumstance_tokens(self) -> tuple[str, ...]:
        return tuple(self.circumstance.split())

    @property
    def rule_id(self) -> str:
        return f"{self.source}->{self.target}:{self.commonality}"


@dataclass(frozen=True)
class PerturbedCase:
    original_id: str
    sentences: tuple[tuple[str, ...], ...]
    rule: PerturbationRule

    def to_case(self, original: Case) -> Case:
        return Case(
            id=f"{original.id}::{self.rule.rule_id}",
            sentences=self.sentences,
            charge=original.charge,
            split=original.split,
            source=original.source,
        )


def _count_occurrences(sentences: Sequence[Sequence[str]], phrase: Sequence[str]) -> int:
    total = 0
    m = len(phrase)
    for sent in sentences:
        for start in range(len(sent) - m + 1):
            if tuple(sent[start : start + m]) == tuple(phrase):
                total += 1
    return total


def apply_rule(
    case: Case | AnnotatedCase, rule: PerturbationRule, seed: int | None = None
) -> PerturbedCase:
    """Insert the rule's circumstance into a source-charge case, exactly once.

    With ``anchor="conduct_sentence"`` and annotations available, the
    circumstance is appended as a clause to the first Conduct-labeled
    sentence; otherwise (or with ``anchor="append_end"``) it becomes a new
    final sentence. ``seed`` is reserved for randomized anchor policies and
    is unused by the two deterministic ones.
    """
    labels = None
    if isinstance(case, AnnotatedCase):
        labels = case.labels
        case = case.case
    if case.charge != rule.source:
        raise ValidationError(
            f"case {case.id} has charge {case.charge!r}, rule expects {rule.source!r}"
        )
    phrase = rule.circumstance_tokens
    if _count_occurrences(case.sentences, phrase) > 0:
        raise ValidationError(
            f"case {case.id}: circumstance {rule.circumstance!r} already present"
        )
    sentences = list(case.sentences)
    anchor_index = None
    if rule.anchor == "conduct_sentence" and labels is not None:
        for i, label in enumerate(labels):
            if ElementKind.CONDUCT in label:
                anchor_index = i
                break
    if anchor_index is None:
        sentences.append(phrase)
    else:
        sentences[anchor_index] = sentences[anchor_index] + phrase
    perturbed = PerturbedCase(
        original_id=case.id, sentences=tuple(sentences), rule=rule
    )
    if _count_occurrences(perturbed.sentences, phrase) != 1:
        raise ValidationError(
            f"case {case.id}: insertion produced multiple circumstance occurrences"
        )
    return perturbed


@dataclass(frozen=True)
class RetentionResult:
    rule: PerturbationRule
    sample_size: int
    eligible: int
    retained: int
    raw_retained: int
    details: tuple[dict, ...] = ()

    def __post_init__(self):
        if self.eligible > self.sample_size:
            raise ValidationError("eligible count exceeds sample size")

    @property
    def undefined(self) -> bool:
        return self.eligible == 0

    @property
    def ratio(self) -> float | None:
        """Retention over cases the model originally got right (filtered)."""
        if self.eligible == 0:
            return None
        return self.retained / self.eligible

    @property
    def ratio_raw(self) -> float | None:
        if self.sample_size == 0:
            return None
        return self.raw_retained / self.sample_size


def run_perturbation(
    bundle: ModelBundle,
    caseset: CaseSet,
    rule: PerturbationRule,
    n: int = 200,
    seed: int = 0,
    annotations: AnnotatedCaseSet | None = None,
) -> RetentionResult:
    """Sample source-charge cases from valid+test and measure retention.

    A case is eligible when the unperturbed prediction equals the source
    charge; the filtered ratio uses eligible cases as denominator, the raw
    ratio uses the whole sample.
    """
    pool = [
        c for c in caseset.by_split("valid", "test").cases if c.charge == rule.source
    ]
    if not pool:
        raise ValidationError(
            f"no valid/test cases of charge {rule.source!r} to perturb"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pool))
    sampled = [pool[i] for i in order[: min(n, len(pool))]]
    perturbed_cases = []
    for case in sampled:
        inp: Case | AnnotatedCase = case
        if annotations is not None:
            try:
                inp = annotations.get(case.id)
            except KeyError:
                pass
        perturbed_cases.append(apply_rule(inp, rule).to_case(case))
    before = predict_batch(bundle, sampled)
    after = predict_batch(bundle, perturbed_cases)
    eligible = retained = raw_retained = 0
    details = []
    for case, b, a in zip(sampled, before, after):
        is_eligible = b.top() == rule.source
        still_source = a.top() == rule.source
        eligible += int(is_eligible)
        retained += int(is_eligible and still_source)
        raw_retained += int(still_source)
        details.append(
            {
                "case_id": case.id,
                "pred_before": b.top(),
                "pred_after": a.top(),
                "eligible": bool(is_eligible),
            }
        )
    return RetentionResult(
        rule=rule,
        sample_size=len(sampled),
        eligible=eligible,
        retained=retained,
        raw_retained=raw_retained,
        details=tuple(details),
    )


# ---------------------------------------------------------------------------
# built-in rules
# ---------------------------------------------------------------------------

def _real_rules() -> list[PerturbationRule]:
    """Three confusing pairs of Chinese charges, two circumstances each.

    The circumstance text is character-tokenized Chinese (the form a real
    charge corpus would use); the gloss carries the English reading. Within
    each pair the starred/common circumstance is the phrasing that occurs
    far more often in practice.
    """
    rows = [
        ("FS", "Rob", "armed with a weapon", "持 刀 行 抢", "common", "armed with a knife"),
        ("FS", "Rob", "armed with a weapon", "持 棍 棒 行 抢", "uncommon", "armed with a baton"),
        (
            "TFT",
            "Rob",
            "using violence against pursuers",
            "用 弹 簧 刀 伤 害 追 赶 者",
            "common",
            "hurt pursuers with a switchblade",
        ),
        (
            "TFT",
            "Rob",
            "using violence against pursuers",
            "向 保 安 喷 辣 椒 水",
            "uncommon",
            "spray the security guards with pepper",
        ),
        (
            "TA",
            "NH",
            "on a non-public transport road",
            "在 封 闭 施 工 的 道 路 上",
            "common",
            "on a road closed for construction",
        ),
        (
            "TA",
            "NH",
            "on a non-public transport road",
            "在 维 修 下 水 道 的 道 路 上",
            "uncommon",
            "on a road where the sewer is being repaired",
        ),
    ]
    return [
        PerturbationRule(
            source=s,
            target=t,
            knowledge=k,
            circumstance=c,
            commonality=common,
            anchor="conduct_sentence",
            gloss=gloss,
        )
        for s, t, k, c, common, gloss in rows
    ]


def _synthetic_rules(spec: SynthSpec) -> list[PerturbationRule]:
    rules = []
    for pair in spec.pairs:
        for circumstance, commonality in ((pair.common, "common"), (pair.uncommon, "uncommon")):
            rules.append(
                PerturbationRule(
                    source=pair.source,
                    target=pair.target,
                    knowledge=pair.knowledge,
                    circumstance=circumstance,
                    commonality=commonality,
                    anchor="conduct_sentence",
                )
            )
    return rules


def builtin_rules(
    configuration: str = "real", spec: SynthSpec | None = None
) -> list[PerturbationRule]:
    """The shipped rule sets.

    ``"real"`` yields the six rules over the Chinese confusing pairs;
    ``"synthetic"`` derives rules from a synthetic spec's confusing pairs
    (default spec when none is given), whose circumstances are exactly the
    target charges' discriminative markers.
    """
    if configuration == "real":
        return _real_rules()
    if configuration == "synthetic":
        return _synthetic_rules(spec if spec is not None else default_synth_spec())
    raise ValidationError(
        f"unknown rule configuration {configuration!r} (expected real or synthetic)"
    )


def save_rules(rules: Iterable[PerturbationRule], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rule in rules:
            record = {
                "source": rule.source,
                "target": rule.target,
                "knowledge": rule.knowledge,
                "circumstance": rule.circumstance,
                "commonality": rule.commonality,
                "anchor": rule.anchor,
            }
            if rule.gloss is not None:
                record["gloss"] = rule.gloss
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")


def load_rules(path: str | Path) -> list[PerturbationRule]:
    path = Path(path)
    rules = []
    for lineno, line in enumerate(path.open("r", encoding="utf-8"), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
        try:
            rules.append(
                PerturbationRule(
                    source=record["source"],
                    target=record["target"],
                    knowledge=record.get("knowledge", ""),
                    circumstance=record["circumstance"],
                    commonality=record["commonality"],
                    anchor=record.get("anchor", "conduct_sentence"),
                    gloss=record.get("gloss"),
                )
            )
        except KeyError as exc:
            raise ParseError(f"{path}:{lineno}: missing field {exc}")
    return rules
