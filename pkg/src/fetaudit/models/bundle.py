"""Model bundles: a frozen classifier plus everything needed to run it.

A bundle pairs an architecture tag with its vocabulary, parameter tensors,
label set and config. ``predict``/``encode`` dispatch on the tag so the
audit stages treat rule models, trained networks and external adapters
uniformly. Bundles serialize to a single zip archive (config + vocab as
JSON, tensors as row-major float64 ``.npy`` entries) and round-trip to
bit-identical predictions.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import autodiff as ad
from ..corpus import Case, INNOCENT
from ..errors import ContractError, PipelineError, ValidationError
from . import adapter as adapter_registry
from .networks import ARCHITECTURES, TrainConfig, make_batch
from .oracle import OracleKnowledge, oracle_encode_arrays
from .vocab import Vocab

FORMAT_VERSION = 1

PROB_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ChargeDistribution:
    """Probability per label; labels follow the bundle's label set order."""

    labels: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if probs.shape != (len(self.labels),):
            raise ValidationError("distribution shape does not match label set")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
            raise ValidationError("distribution entries must be finite and non-negative")
        if abs(float(probs.sum()) - 1.0) > PROB_TOLERANCE:
            raise ValidationError(f"distribution sums to {probs.sum()}, not 1")

    def prob(self, label: str) -> float:
        return float(self.probs[self.labels.index(label)])

    def top(self) -> str:
        return self.labels[int(np.argmax(self.probs))]


@dataclass(frozen=True)
class EncoderOutput:
    """Per-token vectors, a case-level fact vector and mean-pooled
    per-sentence vectors."""

    token_vectors: np.ndarray   # (n, d)
    fact_vector: np.ndarray     # (d,)
    sentence_vectors: np.ndarray  # (s, d)


def mean_pool_sentences(
    token_vectors: np.ndarray, ranges: Sequence[tuple[int, int]]
) -> np.ndarray:
    return np.stack([token_vectors[lo:hi].mean(axis=0) for lo, hi in ranges])


def encoder_output_from_token_vectors(
    case: Case, token_vectors: np.ndarray, fact_vector: np.ndarray | None = None
) -> EncoderOutput:
    """Helper for adapters: derives pooled vectors the contractual way."""
    token_vectors = np.asarray(token_vectors, dtype=np.float64)
    sentence_vectors = mean_pool_sentences(token_vectors, case.sentence_ranges())
    if fact_vector is None:
        fact_vector = token_vectors.mean(axis=0)
    return EncoderOutput(
        token_vectors=token_vectors,
        fact_vector=np.asarray(fact_vector, dtype=np.float64),
        sentence_vectors=sentence_vectors,
    )


def validate_encoder_output(out: EncoderOutput, case: Case, where: str) -> EncoderOutput:
    n = case.num_tokens
    s = len(case.sentences)
    tv = np.asarray(out.token_vectors)
    fv = np.asarray(out.fact_vector)
    sv = np.asarray(out.sentence_vectors)
    if tv.ndim != 2 or tv.shape[0] != n:
        raise ContractError(f"{where}: token_vectors must be ({n}, d), got {tv.shape}")
    d = tv.shape[1]
    if fv.shape != (d,):
        raise ContractError(f"{where}: fact_vector must be ({d},), got {fv.shape}")
    if sv.shape != (s, d):
        raise ContractError(f"{where}: sentence_vectors must be ({s}, {d}), got {sv.shape}")
    for name, arr in (("token_vectors", tv), ("fact_vector", fv), ("sentence_vectors", sv)):
        if not np.all(np.isfinite(arr)):
            raise ContractError(f"{where}: {name} contains non-finite entries")
    expected = mean_pool_sentences(tv, case.sentence_ranges())
    if not np.allclose(sv, expected, atol=1e-8):
        raise ContractError(
            f"{where}: sentence_vectors must be the padding-free mean of token_vectors"
        )
    return out


@dataclass
class ModelBundle:
    architecture: str
    label_set: tuple[str, ...]
    vocab: Vocab | None = None
    params: dict[str, np.ndarray] = field(default_factory=dict)
    config: TrainConfig | None = None
    aux: dict = field(default_factory=dict)
    knowledge: OracleKnowledge | None = None
    adapter_tag: str | None = None
    seed: int = 0
    training_log: tuple[dict, ...] = ()

    def __post_init__(self):
        if INNOCENT not in self.label_set:
            raise ValidationError(f"label set must include {INNOCENT}")
        if self.architecture in ARCHITECTURES and self.params:
            head = self.params.get("charge_W")
            if head is not None and head.shape[1] != len(self.label_set):
                raise ValidationError(
                    "charge head width does not match the label set "
                    f"({head.shape[1]} vs {len(self.label_set)})"
                )

    @property
    def label_index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.label_set)}

    def param_tensors(self) -> dict[str, ad.Tensor]:
        return {k: ad.Tensor(v, requires_grad=False) for k, v in self.params.items()}


def build_oracle_bundle(knowledge: OracleKnowledge | None = None, spec=None) -> ModelBundle:
    if knowledge is None:
        if spec is None:
            raise ValidationError("need oracle knowledge or a synthetic spec")
        knowledge = OracleKnowledge.from_synth_spec(spec)
    labels = tuple(sorted(knowledge.markers)) + (INNOCENT,)
    return ModelBundle(architecture="fet_oracle", label_set=labels, knowledge=knowledge)


def build_adapter_bundle(tag: str, label_set: Sequence[str]) -> ModelBundle:
    adapter_registry.get_adapter(tag)  # fail fast on unknown tags
    labels = tuple(label_set)
    return ModelBundle(architecture="external_adapter", label_set=labels, adapter_tag=tag)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _one_hot_distribution(labels: tuple[str, ...], label: str) -> ChargeDistribution:
    probs = np.zeros(len(labels))
    probs[labels.index(label)] = 1.0
    return ChargeDistribution(labels=labels, probs=probs)


def _forward_cases(bundle: ModelBundle, cases: Sequence[Case]):
    arch = ARCHITECTURES[bundle.architecture]
    batch = make_batch(cases, bundle.vocab)
    tensors = bundle.param_tensors()
    token_states, fact, logits = arch.forward(tensors, batch, bundle.config)
    return batch, token_states.value, fact.value, {k: v.value for k, v in logits.items()}


def predict_batch(bundle: ModelBundle, cases: Sequence[Case]) -> list[ChargeDistribution]:
    if len(cases) == 0:
        raise ValidationError("predict over an empty case list")
    if bundle.architecture in ARCHITECTURES:
        _, _, _, logits = _forward_cases(bundle, cases)
        probs = ad.softmax_values(logits["charge"])
        return [ChargeDistribution(labels=bundle.label_set, probs=row) for row in probs]
    if bundle.architecture == "fet_oracle":
        return [
            _one_hot_distribution(bundle.label_set, bundle.knowledge.verdict(case))
            for case in cases
        ]
    if bundle.architecture == "external_adapter":
        adapter = adapter_registry.get_adapter(bundle.adapter_tag)
        if not hasattr(adapter, "predict"):
            raise PipelineError(
                f"adapter {bundle.adapter_tag!r} supports encoding only, not prediction"
            )
        out = []
        for case in cases:
            dist = adapter.predict(case)
            if not isinstance(dist, ChargeDistribution):
                dist = ChargeDistribution(labels=bundle.label_set, probs=np.asarray(dist))
            out.append(dist)
        return out
    raise ValidationError(f"unknown architecture {bundle.architecture!r}")


def predict(bundle: ModelBundle, case: Case) -> ChargeDistribution:
    return predict_batch(bundle, [case])[0]


def encode_batch(bundle: ModelBundle, cases: Sequence[Case]) -> list[EncoderOutput]:
    if len(cases) == 0:
        raise ValidationError("encode over an empty case list")
    if bundle.architecture in ARCHITECTURES:
        _, token_states, fact, _ = _forward_cases(bundle, cases)
        outputs = []
        for i, case in enumerate(cases):
            n = case.num_tokens
            tv = token_states[i, :n, :]
            if not np.all(np.isfinite(tv)) or not np.all(np.isfinite(fact[i])):
                raise PipelineError(f"non-finite encoder state for case {case.id}")
            outputs.append(
                EncoderOutput(
                    token_vectors=tv,
                    fact_vector=fact[i],
                    sentence_vectors=mean_pool_sentences(tv, case.sentence_ranges()),
                )
            )
        return outputs
    if bundle.architecture == "fet_oracle":
        outputs = []
        for case in cases:
            tv, fv, sv = oracle_encode_arrays(bundle.knowledge, case)
            outputs.append(EncoderOutput(token_vectors=tv, fact_vector=fv, sentence_vectors=sv))
        return outputs
    if bundle.architecture == "external_adapter":
        adapter = adapter_registry.get_adapter(bundle.adapter_tag)
        return [
            validate_encoder_output(
                adapter.encode(case), case, where=f"adapter {bundle.adapter_tag!r}"
            )
            for case in cases
        ]
    raise ValidationError(f"unknown architecture {bundle.architecture!r}")


def encode(bundle: ModelBundle, case: Case) -> EncoderOutput:
    return encode_batch(bundle, [case])[0]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    if bundle.architecture == "external_adapter":
        raise ValidationError("external adapter bundles are not serializable")
    meta = {
        "format_version": FORMAT_VERSION,
        "architecture": bundle.architecture,
        "label_set": list(bundle.label_set),
        "seed": bundle.seed,
        "config": bundle.config.to_dict() if bundle.config else None,
        "aux": bundle.aux,
        "vocab": bundle.vocab.ordered_tokens() if bundle.vocab else None,
        "knowledge": bundle.knowledge.to_json_dict() if bundle.knowledge else None,
        "training_log": list(bundle.training_log),
        "param_names": sorted(bundle.params),
    }
    with zipfile.ZipFile(Path(path), "w", zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("bundle.json", date_time=(1980, 1, 1, 0, 0, 0))
        zf.writestr(info, json.dumps(meta, ensure_ascii=False, sort_keys=True))
        for name in sorted(bundle.params):
            buf = io.BytesIO()
            np.lib.format.write_array(
                buf, np.ascontiguousarray(bundle.params[name], dtype=np.float64)
            )
            info = zipfile.ZipInfo(f"params/{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def load_bundle(path: str | Path) -> ModelBundle:
    path = Path(path)
    with zipfile.ZipFile(path, "r") as zf:
        try:
            meta = json.loads(zf.read("bundle.json"))
        except KeyError:
            raise ValidationError(f"{path}: not a model bundle (missing bundle.json)")
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValidationError(
                f"{path}: unsupported bundle format {meta.get('format_version')!r}"
            )
        params = {}
        for name in meta["param_names"]:
            with zf.open(f"params/{name}.npy") as fh:
                params[name] = np.lib.format.read_array(fh)
    return ModelBundle(
        architecture=meta["architecture"],
        label_set=tuple(meta["label_set"]),
        vocab=Vocab.from_ordered_tokens(meta["vocab"]) if meta.get("vocab") else None,
        params=params,
        config=TrainConfig.from_dict(meta["config"]) if meta.get("config") else None,
        aux=meta.get("aux") or {},
        knowledge=(
            OracleKnowledge.from_json_dict(meta["knowledge"]) if meta.get("knowledge") else None
        ),
        seed=int(meta.get("seed", 0)),
        training_log=tuple(meta.get("training_log", ())),
    )
