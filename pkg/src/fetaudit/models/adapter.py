"""Registry for external pretrained-encoder adapters.

An adapter is any object with ``encode(case) -> EncoderOutput``; an
optional ``predict(case) -> ChargeDistribution`` unlocks the perturbation
and ablation stages. Adapters are inference-only: they are never trained
and their bundles are not serializable.
"""
from __future__ import annotations

from typing import Protocol

from ..corpus import Case
from ..errors import ContractError

_REGISTRY: dict[str, object] = {}


class ExternalEncoder(Protocol):
    def encode(self, case: Case): ...


def register_external_encoder(adapter, tag: str | None = None) -> str:
    """Register an adapter and return the architecture tag to refer to it."""
    if not hasattr(adapter, "encode") or not callable(adapter.encode):
        raise ContractError("adapter must provide a callable encode(case)")
    if tag is None:
        tag = f"external:{type(adapter).__name__}:{len(_REGISTRY)}"
    _REGISTRY[tag] = adapter
    return tag


def get_adapter(tag: str):
    try:
        return _REGISTRY[tag]
    except KeyError:
        raise ContractError(f"no external encoder registered under tag {tag!r}")


def registered_tags() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))
