"""Charge classifiers sharing one encoder/predictor contract."""
from .adapter import get_adapter, register_external_encoder, registered_tags
from .attributes import (
    AttributeSpec,
    default_article_map,
    default_attribute_spec,
    default_term_map,
)
from .bundle import (
    ChargeDistribution,
    EncoderOutput,
    ModelBundle,
    build_adapter_bundle,
    build_oracle_bundle,
    encode,
    encode_batch,
    encoder_output_from_token_vectors,
    load_bundle,
    mean_pool_sentences,
    predict,
    predict_batch,
    save_bundle,
    validate_encoder_output,
)
from .networks import ALL_TAGS, ARCHITECTURES, TRAINABLE_TAGS, TrainConfig
from .oracle import OracleKnowledge
from .training import ChargeMetrics, evaluate, grad_check, train, zero_point_gradient_norm
from .vocab import PAD_INDEX, PAD_TOKEN, UNK_INDEX, UNK_TOKEN, Vocab, build_vocab

__all__ = [
    "ALL_TAGS",
    "ARCHITECTURES",
    "AttributeSpec",
    "ChargeDistribution",
    "ChargeMetrics",
    "EncoderOutput",
    "ModelBundle",
    "OracleKnowledge",
    "PAD_INDEX",
    "PAD_TOKEN",
    "TRAINABLE_TAGS",
    "TrainConfig",
    "UNK_INDEX",
    "UNK_TOKEN",
    "Vocab",
    "build_adapter_bundle",
    "build_oracle_bundle",
    "build_vocab",
    "default_article_map",
    "default_attribute_spec",
    "default_term_map",
    "encode",
    "encode_batch",
    "encoder_output_from_token_vectors",
    "evaluate",
    "get_adapter",
    "grad_check",
    "load_bundle",
    "mean_pool_sentences",
    "predict",
    "predict_batch",
    "register_external_encoder",
    "registered_tags",
    "save_bundle",
    "train",
    "validate_encoder_output",
    "zero_point_gradient_norm",
]
