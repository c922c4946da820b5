from __future__ import annotations

import pytest

from fetaudit.corpus import Case, ElementKind
from fetaudit.models import TrainConfig, build_oracle_bundle, train
from fetaudit.synth import SynthSpec, default_synth_spec, generate_synthetic

S = ElementKind.SUBJECT
M = ElementKind.MENTAL_STATE
C = ElementKind.CONDUCT
O = ElementKind.OBJECT


def make_case(case_id, sentences, charge="theft", split="train", source="synthetic"):
    return Case(
        id=case_id,
        sentences=tuple(tuple(s.split()) for s in sentences),
        charge=charge,
        split=split,
        source=source,
    )


@pytest.fixture(scope="session")
def small_spec() -> SynthSpec:
    return default_synth_spec(
        cases_per_charge=12, innocent_fraction=0.25, noise_rate=0.1, seed=101
    )


@pytest.fixture(scope="session")
def small_corpus(small_spec):
    return generate_synthetic(small_spec)


@pytest.fixture(scope="session")
def oracle_bundle(small_spec):
    return build_oracle_bundle(spec=small_spec)


@pytest.fixture(scope="session")
def pair_spec() -> SynthSpec:
    base = default_synth_spec()
    templates = tuple(
        t for t in base.templates if t.name in ("forcible_seizure", "robbery")
    )
    pairs = tuple(p for p in base.pairs if p.source == "forcible_seizure")
    return SynthSpec(
        templates=templates,
        pairs=pairs,
        cases_per_charge=60,
        innocent_fraction=0.0,
        noise_rate=0.0,
        seed=77,
    )


@pytest.fixture(scope="session")
def pair_corpus(pair_spec):
    return generate_synthetic(pair_spec)


@pytest.fixture(scope="session")
def two_charge_corpus():
    base = default_synth_spec()
    templates = tuple(t for t in base.templates if t.name in ("corruption", "fund_misuse"))
    spec = SynthSpec(
        templates=templates,
        pairs=(),
        cases_per_charge=40,
        innocent_fraction=0.0,
        noise_rate=0.0,
        seed=5,
    )
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def tiny_bilstm_bundle(two_charge_corpus):
    caseset, _ = two_charge_corpus
    cfg = TrainConfig(
        embed_dim=16, hidden_dim=16, attn_dim=8, epochs=12, lr=1.5, seed=2
    )
    return train("attn_bilstm", caseset.by_split("train"), caseset.by_split("valid"), cfg)
