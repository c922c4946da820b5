"""The trainable charge classifiers.

Three desk-scale architectures share one contract: a token encoder
producing per-token states (which the probing stage mean-pools into
sentence vectors), a fact vector, and task heads.

* ``attn_bilstm``   - BiLSTM token states, additive attention pooling.
* ``topjudge_cnn``  - per-position CNN features, max-over-time fact vector,
                      and a three-task decoder chained in topological order
                      article -> charge -> term via per-task LSTM cells.
* ``fewshot_attr``  - unidirectional LSTM, last-state fact vector, charge
                      head plus per-attribute binary heads.

All parameters are float64 and every forward builds an autodiff graph, so
analytic gradients can be checked against finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..corpus import Case
from ..errors import ConfigError
from .attributes import AttributeSpec
from .vocab import PAD_INDEX, Vocab

NEG_FILL = -1e30


@dataclass(frozen=True)
class TrainConfig:
    """Architecture dimensions and optimization settings."""

    embed_dim: int = 32
    hidden_dim: int = 40
    attn_dim: int = 16
    filters: int = 16
    kernel_sizes: tuple[int, ...] = (2, 3)
    epochs: int = 30
    batch_size: int = 16
    lr: float = 2.0
    clip: float = 5.0
    seed: int = 0
    min_count: int = 1
    aux_weight: float = 1.0
    term_buckets: int = 4
    attribute_count: int = 10

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr <= 0 or self.clip <= 0:
            raise ConfigError("lr and clip must be positive")
        if min(self.embed_dim, self.hidden_dim, self.attn_dim, self.filters) < 1:
            raise ConfigError("model dimensions must be >= 1")
        if not self.kernel_sizes or any(k < 1 for k in self.kernel_sizes):
            raise ConfigError("kernel sizes must be positive")

    def to_dict(self) -> dict:
        return {
            "dims": {
                "embed": self.embed_dim,
                "hidden": self.hidden_dim,
                "attention": self.attn_dim,
                "filters": self.filters,
                "kernel_sizes": list(self.kernel_sizes),
            },
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "clip": self.clip,
            "seed": self.seed,
            "min_count": self.min_count,
            "aux_tasks": {
                "weight": self.aux_weight,
                "term_buckets": self.term_buckets,
                "attribute_count": self.attribute_count,
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        dims = data.get("dims", {})
        aux = data.get("aux_tasks", {})
        try:
            return cls(
                embed_dim=int(dims.get("embed", 32)),
                hidden_dim=int(dims.get("hidden", 40)),
                attn_dim=int(dims.get("attention", 16)),
                filters=int(dims.get("filters", 16)),
                kernel_sizes=tuple(int(k) for k in dims.get("kernel_sizes", (2, 3))),
                epochs=int(data.get("epochs", 30)),
                batch_size=int(data.get("batch_size", 16)),
                lr=float(data.get("lr", 2.0)),
                clip=float(data.get("clip", 5.0)),
                seed=int(data.get("seed", 0)),
                min_count=int(data.get("min_count", 1)),
                aux_weight=float(aux.get("weight", 1.0)),
                term_buckets=int(aux.get("term_buckets", 4)),
                attribute_count=int(aux.get("attribute_count", 10)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad training config: {exc}")


@dataclass(frozen=True)
class HeadSizes:
    charges: int
    articles: int = 0
    terms: int = 0
    attributes: int = 0


@dataclass
class Batch:
    ids: np.ndarray        # (B, T) int64, padded with PAD_INDEX
    mask: np.ndarray       # (B, T) float64
    lengths: np.ndarray    # (B,) int64
    charge_idx: np.ndarray | None = None
    article_idx: np.ndarray | None = None
    term_idx: np.ndarray | None = None
    attr_targets: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]


def make_batch(
    cases: Sequence[Case],
    vocab: Vocab,
    label_index: Mapping[str, int] | None = None,
    article_map: Mapping[str, int] | None = None,
    term_map: Mapping[str, int] | None = None,
    attr_spec: AttributeSpec | None = None,
) -> Batch:
    lengths = np.array([case.num_tokens for case in cases], dtype=np.int64)
    width = int(lengths.max())
    ids = np.full((len(cases), width), PAD_INDEX, dtype=np.int64)
    mask = np.zeros((len(cases), width), dtype=np.float64)
    for i, case in enumerate(cases):
        row = vocab.encode(case.tokens)
        ids[i, : len(row)] = row
        mask[i, : len(row)] = 1.0
    batch = Batch(ids=ids, mask=mask, lengths=lengths)
    if label_index is not None:
        batch.charge_idx = np.array([label_index[c.charge] for c in cases], dtype=np.int64)
    if article_map is not None:
        batch.article_idx = np.array([article_map[c.charge] for c in cases], dtype=np.int64)
    if term_map is not None:
        batch.term_idx = np.array([term_map[c.charge] for c in cases], dtype=np.int64)
    if attr_spec is not None:
        batch.attr_targets = np.array(
            [attr_spec.bits(c.charge) for c in cases], dtype=np.float64
        )
    return batch


# ---------------------------------------------------------------------------
# shared building blocks
# ---------------------------------------------------------------------------

def _uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _init_lstm(rng, params: dict, prefix: str, in_dim: int, hidden: int) -> None:
    params[f"{prefix}_Wih"] = _uniform(rng, in_dim, 4 * hidden, (in_dim, 4 * hidden))
    params[f"{prefix}_Whh"] = _uniform(rng, hidden, 4 * hidden, (hidden, 4 * hidden))
    bias = np.zeros(4 * hidden)
    bias[hidden : 2 * hidden] = 1.0  # forget-gate bias
    params[f"{prefix}_b"] = bias


def _lstm_cell(x: Tensor, h: Tensor, c: Tensor, p: dict[str, Tensor], prefix: str, hidden: int):
    gates = ad.add(ad.add(ad.matmul(x, p[f"{prefix}_Wih"]), ad.matmul(h, p[f"{prefix}_Whh"])), p[f"{prefix}_b"])
    i = ad.sigmoid(ad.slice_cols(gates, 0, hidden))
    f = ad.sigmoid(ad.slice_cols(gates, hidden, 2 * hidden))
    g = ad.tanh(ad.slice_cols(gates, 2 * hidden, 3 * hidden))
    o = ad.sigmoid(ad.slice_cols(gates, 3 * hidden, 4 * hidden))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def _lstm_run(
    embs: list[Tensor],
    mask: np.ndarray,
    p: dict[str, Tensor],
    prefix: str,
    hidden: int,
    reverse: bool = False,
) -> list[Tensor]:
    """Unroll an LSTM over time with state carried through masked steps.

    At padded positions the previous state is passed through unchanged, so
    outputs are invariant to the amount of padding.
    """
    batch = embs[0].shape[0]
    h = Tensor(np.zeros((batch, hidden)))
    c = Tensor(np.zeros((batch, hidden)))
    steps = range(len(embs) - 1, -1, -1) if reverse else range(len(embs))
    states: dict[int, Tensor] = {}
    for t in steps:
        keep = mask[:, t : t + 1]
        h_new, c_new = _lstm_cell(embs[t], h, c, p, prefix, hidden)
        h = ad.add(ad.mul(h_new, keep), ad.mul(h, 1.0 - keep))
        c = ad.add(ad.mul(c_new, keep), ad.mul(c, 1.0 - keep))
        states[t] = h
    return [states[t] for t in range(len(embs))]


def _embed_steps(p: dict[str, Tensor], ids: np.ndarray) -> list[Tensor]:
    return [ad.take_rows(p["emb"], ids[:, t]) for t in range(ids.shape[1])]


def _stack_time(steps: list[Tensor], width: int) -> Tensor:
    batch, dim = steps[0].shape
    return ad.concat([ad.reshape(s, (batch, 1, dim)) for s in steps], axis=1)


def _linear(x: Tensor, p: dict[str, Tensor], prefix: str) -> Tensor:
    return ad.add(ad.matmul(x, p[f"{prefix}_W"]), p[f"{prefix}_b"])


# ---------------------------------------------------------------------------
# architectures
# ---------------------------------------------------------------------------

class AttnBiLSTM:
    name = "attn_bilstm"
    tasks = ("charge",)

    @staticmethod
    def encoder_dim(cfg: TrainConfig) -> int:
        return 2 * cfg.hidden_dim

    @staticmethod
    def init_params(vocab_size: int, heads: HeadSizes, cfg: TrainConfig, rng) -> dict[str, np.ndarray]:
        e, h, a = cfg.embed_dim, cfg.hidden_dim, cfg.attn_dim
        params: dict[str, np.ndarray] = {}
        params["emb"] = rng.uniform(-0.5, 0.5, size=(vocab_size, e))
        params["emb"][PAD_INDEX] = 0.0
        _init_lstm(rng, params, "fwd", e, h)
        _init_lstm(rng, params, "bwd", e, h)
        params["attn_W"] = _uniform(rng, 2 * h, a, (2 * h, a))
        params["attn_v"] = _uniform(rng, a, 1, (a, 1))
        params["charge_W"] = _uniform(rng, 2 * h, heads.charges, (2 * h, heads.charges))
        params["charge_b"] = np.zeros(heads.charges)
        return params

    @staticmethod
    def forward(p: dict[str, Tensor], batch: Batch, cfg: TrainConfig):
        h = cfg.hidden_dim
        batch_size, width = batch.ids.shape
        embs = _embed_steps(p, batch.ids)
        fwd = _lstm_run(embs, batch.mask, p, "fwd", h)
        bwd = _lstm_run(embs, batch.mask, p, "bwd", h, reverse=True)
        steps = [ad.concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
        token_states = _stack_time(steps, width)
        flat = ad.reshape(token_states, (batch_size * width, 2 * h))
        scores = ad.reshape(
            ad.matmul(ad.tanh(ad.matmul(flat, p["attn_W"])), p["attn_v"]),
            (batch_size, width),
        )
        alpha = ad.masked_softmax(scores, batch.mask, axis=1)
        weighted = ad.mul(token_states, ad.reshape(alpha, (batch_size, width, 1)))
        fact = ad.reduce_sum(weighted, axis=1)
        return token_states, fact, {"charge": _linear(fact, p, "charge")}

    @staticmethod
    def loss(p: dict[str, Tensor], batch: Batch, cfg: TrainConfig) -> Tensor:
        _, _, logits = AttnBiLSTM.forward(p, batch, cfg)
        return ad.cross_entropy(logits["charge"], batch.charge_idx)


class TopJudgeCNN:
    name = "topjudge_cnn"
    tasks = ("article", "charge", "term")
    # every task's cell is seeded with the summed states of all earlier tasks
    dag = {"article": (), "charge": ("article",), "term": ("article", "charge")}

    @staticmethod
    def encoder_dim(cfg: TrainConfig) -> int:
        return len(cfg.kernel_sizes) * cfg.filters

    @staticmethod
    def init_params(vocab_size: int, heads: HeadSizes, cfg: TrainConfig, rng) -> dict[str, np.ndarray]:
        e, h, f = cfg.embed_dim, cfg.hidden_dim, cfg.filters
        d = TopJudgeCNN.encoder_dim(cfg)
        params: dict[str, np.ndarray] = {}
        params["emb"] = rng.uniform(-0.5, 0.5, size=(vocab_size, e))
        params["emb"][PAD_INDEX] = 0.0
        for k in cfg.kernel_sizes:
            params[f"conv{k}_W"] = _uniform(rng, k * e, f, (k * e, f))
            params[f"conv{k}_b"] = np.zeros(f)
        for task in TopJudgeCNN.tasks:
            _init_lstm(rng, params, f"cell_{task}", d, h)
        sizes = {"article": heads.articles, "charge": heads.charges, "term": heads.terms}
        for task in TopJudgeCNN.tasks:
            params[f"head_{task}_W"] = _uniform(rng, h, sizes[task], (h, sizes[task]))
            params[f"head_{task}_b"] = np.zeros(sizes[task])
        return params

    @staticmethod
    def forward(p: dict[str, Tensor], batch: Batch, cfg: TrainConfig):
        e, h = cfg.embed_dim, cfg.hidden_dim
        batch_size, width = batch.ids.shape
        flat_ids = batch.ids.reshape(-1)
        emb_mat = ad.take_rows(p["emb"], flat_ids)
        padded = ad.concat([emb_mat, Tensor(np.zeros((1, e)))], axis=0)
        features = []
        for k in cfg.kernel_sizes:
            pos = np.arange(width)[None, :, None] + np.arange(k)[None, None, :]
            rows = np.arange(batch_size)[:, None, None] * width + pos
            rows = np.where(pos < width, rows, batch_size * width).reshape(-1)
            windows = ad.reshape(ad.take_rows(padded, rows), (batch_size * width, k * e))
            conv = ad.relu(ad.add(ad.matmul(windows, p[f"conv{k}_W"]), p[f"conv{k}_b"]))
            features.append(ad.reshape(conv, (batch_size, width, cfg.filters)))
        token_states = ad.concat(features, axis=2)
        mask3 = batch.mask[:, :, None]
        masked = ad.add(ad.mul(token_states, mask3), Tensor((1.0 - mask3) * NEG_FILL))
        fact = ad.reduce_max(masked, axis=1)
        states: dict[str, tuple[Tensor, Tensor]] = {}
        logits: dict[str, Tensor] = {}
        for task in TopJudgeCNN.tasks:
            preds = TopJudgeCNN.dag[task]
            if preds:
                h0, c0 = states[preds[0]]
                for earlier in preds[1:]:
                    h0 = ad.add(h0, states[earlier][0])
                    c0 = ad.add(c0, states[earlier][1])
            else:
                h0 = Tensor(np.zeros((batch_size, h)))
                c0 = Tensor(np.zeros((batch_size, h)))
            h_t, c_t = _lstm_cell(fact, h0, c0, p, f"cell_{task}", h)
            states[task] = (h_t, c_t)
            logits[task] = _linear(h_t, p, f"head_{task}")
        return token_states, fact, logits

    @staticmethod
    def loss(p: dict[str, Tensor], batch: Batch, cfg: TrainConfig) -> Tensor:
        _, _, logits = TopJudgeCNN.forward(p, batch, cfg)
        loss = ad.cross_entropy(logits["charge"], batch.charge_idx)
        aux = ad.add(
            ad.cross_entropy(logits["article"], batch.article_idx),
            ad.cross_entropy(logits["term"], batch.term_idx),
        )
        return ad.add(loss, ad.mul(aux, cfg.aux_weight))


class FewShotAttr:
    name = "fewshot_attr"
    tasks = ("charge", "attributes")

    @staticmethod
    def encoder_dim(cfg: TrainConfig) -> int:
        return cfg.hidden_dim

    @staticmethod
    def init_params(vocab_size: int, heads: HeadSizes, cfg: TrainConfig, rng) -> dict[str, np.ndarray]:
        e, h = cfg.embed_dim, cfg.hidden_dim
        params: dict[str, np.ndarray] = {}
        params["emb"] = rng.uniform(-0.5, 0.5, size=(vocab_size, e))
        params["emb"][PAD_INDEX] = 0.0
        _init_lstm(rng, params, "lstm", e, h)
        params["charge_W"] = _uniform(rng, h, heads.charges, (h, heads.charges))
        params["charge_b"] = np.zeros(heads.charges)
        params["attr_W"] = _uniform(rng, h, heads.attributes, (h, heads.attributes))
        params["attr_b"] = np.zeros(heads.attributes)
        return params

    @staticmethod
    def forward(p: dict[str, Tensor], batch: Batch, cfg: TrainConfig):
        h = cfg.hidden_dim
        batch_size, width = batch.ids.shape
        embs = _embed_steps(p, batch.ids)
        steps = _lstm_run(embs, batch.mask, p, "lstm", h)
        token_states = _stack_time(steps, width)
        last = np.zeros((batch_size, width))
        last[np.arange(batch_size), batch.lengths - 1] = 1.0
        fact = ad.reduce_sum(ad.mul(token_states, last[:, :, None]), axis=1)
        return token_states, fact, {
            "charge": _linear(fact, p, "charge"),
            "attributes": _linear(fact, p, "attr"),
        }

    @staticmethod
    def loss(p: dict[str, Tensor], batch: Batch, cfg: TrainConfig) -> Tensor:
        _, _, logits = FewShotAttr.forward(p, batch, cfg)
        loss = ad.cross_entropy(logits["charge"], batch.charge_idx)
        aux = ad.binary_cross_entropy(logits["attributes"], batch.attr_targets)
        return ad.add(loss, ad.mul(aux, cfg.aux_weight))


ARCHITECTURES = {
    AttnBiLSTM.name: AttnBiLSTM,
    TopJudgeCNN.name: TopJudgeCNN,
    FewShotAttr.name: FewShotAttr,
}

TRAINABLE_TAGS = tuple(sorted(ARCHITECTURES))
ALL_TAGS = TRAINABLE_TAGS + ("external_adapter", "fet_oracle")
