"""Deterministic mini-batch gradient-descent training and gradient checks.

Plain SGD with a fixed step and global-norm clipping: the whole trajectory
is a function of the seed, so two runs with the same config produce
bit-identical parameters. The returned bundle carries the epoch snapshot
with the best validation accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .. import autodiff as ad
from .. import metrics as metrics_mod
from ..corpus import Case, CaseSet, INNOCENT
from ..errors import ConfigError, TrainingDivergedError, ValidationError
from .attributes import default_article_map, default_attribute_spec, default_term_map, AttributeSpec
from .bundle import ModelBundle, predict_batch
from .networks import ARCHITECTURES, HeadSizes, TrainConfig, make_batch
from .vocab import PAD_INDEX, build_vocab


@dataclass(frozen=True)
class ChargeMetrics:
    """Accuracy plus macro precision/recall/F1 over supported labels."""

    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.accuracy, self.macro_f1, self.macro_precision, self.macro_recall)


def _require_architecture(architecture: str):
    try:
        return ARCHITECTURES[architecture]
    except KeyError:
        valid = ", ".join(sorted(ARCHITECTURES))
        raise ConfigError(
            f"unknown trainable architecture {architecture!r} (valid tags: {valid})"
        )


def _aux_for(architecture: str, label_set: tuple[str, ...], cfg: TrainConfig):
    article_map = term_map = None
    attr_spec = None
    if architecture == "topjudge_cnn":
        article_map = default_article_map(label_set)
        term_map = default_term_map(label_set, cfg.term_buckets)
    elif architecture == "fewshot_attr":
        attr_spec = default_attribute_spec(label_set, cfg.attribute_count)
    return article_map, term_map, attr_spec


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def train(
    architecture: str,
    trainset: CaseSet,
    validset: CaseSet,
    config: TrainConfig,
    attr_spec: AttributeSpec | None = None,
) -> ModelBundle:
    """Fit one architecture; returns the best-by-validation-accuracy bundle."""
    arch = _require_architecture(architecture)
    if len(trainset) == 0 or len(validset) == 0:
        raise ValidationError("train and valid sets must be non-empty")
    label_set = trainset.label_set
    label_index = {label: i for i, label in enumerate(label_set)}
    vocab = build_vocab(trainset, min_count=config.min_count)
    article_map, term_map, default_attrs = _aux_for(architecture, label_set, config)
    if attr_spec is None:
        attr_spec = default_attrs
    heads = HeadSizes(
        charges=len(label_set),
        articles=len(label_set),
        terms=config.term_buckets,
        attributes=attr_spec.count if attr_spec else 0,
    )
    rng = np.random.default_rng(config.seed)
    params = arch.init_params(vocab.size, heads, config, rng)
    tensors = {k: ad.Tensor(v, requires_grad=True) for k, v in params.items()}
    # tensors share storage with params so in-place updates stay visible
    params = {k: t.value for k, t in tensors.items()}
    names = sorted(tensors)

    cases = list(trainset.cases)
    bundle = ModelBundle(
        architecture=architecture,
        label_set=label_set,
        vocab=vocab,
        params=params,
        config=config,
        aux={
            "article_map": article_map,
            "term_map": term_map,
            "attributes": attr_spec.to_json_dict() if attr_spec else None,
        },
        seed=config.seed,
    )

    best_params = {k: v.copy() for k, v in params.items()}
    best_acc = -1.0
    log: list[dict] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(cases))
        losses = []
        for idx in _batches(order, config.batch_size):
            batch = make_batch(
                [cases[i] for i in idx],
                vocab,
                label_index=label_index,
                article_map=article_map,
                term_map=term_map,
                attr_spec=attr_spec,
            )
            for t in tensors.values():
                t.grad = None
            loss = arch.loss(tensors, batch, config)
            if not np.isfinite(loss.value):
                raise TrainingDivergedError(epoch)
            ad.backward(loss)
            grads = {}
            for name in names:
                g = tensors[name].grad
                grads[name] = np.zeros_like(tensors[name].value) if g is None else g
            grads["emb"][PAD_INDEX, :] = 0.0  # padding row stays frozen
            norm = ad.global_norm([grads[n] for n in names])
            scale = config.lr * (config.clip / norm if norm > config.clip else 1.0)
            for name in names:
                tensors[name].value -= scale * grads[name]
            losses.append(float(loss.value))
        acc = evaluate(bundle, validset).accuracy
        log.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(losses)),
                "valid_accuracy": acc,
            }
        )
        if acc > best_acc:
            best_acc = acc
            best_params = {k: v.copy() for k, v in params.items()}

    bundle.params = best_params
    bundle.training_log = tuple(log)
    return bundle


def evaluate(bundle: ModelBundle, caseset: CaseSet, chunk: int = 128) -> ChargeMetrics:
    """Accuracy and macro P/R/F1 over labels with gold support."""
    if len(caseset) == 0:
        raise ValidationError("evaluate over an empty case set")
    gold = [case.charge for case in caseset]
    pred: list[str] = []
    cases = list(caseset.cases)
    for start in range(0, len(cases), chunk):
        for dist in predict_batch(bundle, cases[start : start + chunk]):
            pred.append(dist.top())
    p, r, f1 = metrics_mod.macro_prf(gold, pred, bundle.label_set)
    return ChargeMetrics(
        accuracy=metrics_mod.accuracy(gold, pred),
        macro_precision=p,
        macro_recall=r,
        macro_f1=f1,
    )


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def _tiny_setup(architecture: str, seed: int):
    arch = _require_architecture(architecture)
    cfg = TrainConfig(
        embed_dim=2,
        hidden_dim=2,
        attn_dim=2,
        filters=2,
        kernel_sizes=(2,),
        epochs=1,
        batch_size=4,
        lr=0.1,
        seed=seed,
        attribute_count=3,
        term_buckets=3,
    )
    cases = [
        Case(id="g1", sentences=(("red", "fox", "ran"), ("dog", "slept")), charge="alpha", split="train"),
        Case(id="g2", sentences=(("blue", "fox"), ("dog", "ran", "far")), charge="beta", split="train"),
        Case(id="g3", sentences=(("red", "dog"),), charge="alpha", split="train"),
        Case(id="g4", sentences=(("blue", "dog", "slept"),), charge=INNOCENT, split="train"),
    ]
    trainset = CaseSet.from_cases(cases)
    label_set = trainset.label_set
    vocab = build_vocab(trainset)
    article_map, term_map, attr_spec = _aux_for(architecture, label_set, cfg)
    heads = HeadSizes(
        charges=len(label_set),
        articles=len(label_set),
        terms=cfg.term_buckets,
        attributes=attr_spec.count if attr_spec else 0,
    )
    rng = np.random.default_rng(seed)
    params = arch.init_params(vocab.size, heads, cfg, rng)
    batch = make_batch(
        cases,
        vocab,
        label_index={l: i for i, l in enumerate(label_set)},
        article_map=article_map,
        term_map=term_map,
        attr_spec=attr_spec,
    )
    return arch, cfg, params, batch


def grad_check(architecture: str, eps: float = 1e-5, seed: int = 7) -> float:
    """Max relative disagreement between analytic gradients and central
    finite differences on a tiny instance of the architecture."""
    arch, cfg, params, batch = _tiny_setup(architecture, seed)

    def loss_value() -> float:
        tensors = {k: ad.Tensor(v, requires_grad=False) for k, v in params.items()}
        return float(arch.loss(tensors, batch, cfg).value)

    tensors = {k: ad.Tensor(v.copy(), requires_grad=True) for k, v in params.items()}
    loss = arch.loss(tensors, batch, cfg)
    ad.backward(loss)
    worst = 0.0
    for name in sorted(params):
        analytic = tensors[name].grad
        if analytic is None:
            analytic = np.zeros_like(params[name])
        flat = params[name].reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = loss_value()
            flat[i] = keep - eps
            down = loss_value()
            flat[i] = keep
            numeric = (up - down) / (2.0 * eps)
            a = float(analytic.reshape(-1)[i])
            denom = max(abs(a), abs(numeric))
            if denom < 1e-7:
                continue  # below finite-difference resolution
            worst = max(worst, abs(a - numeric) / denom)
    return worst


def zero_point_gradient_norm(architecture: str, seed: int = 7) -> float:
    """Gradient norm of a squared-error loss whose targets equal the model's
    own outputs; the residual is exactly zero so the norm should vanish."""
    arch, cfg, params, batch = _tiny_setup(architecture, seed)
    tensors = {k: ad.Tensor(v, requires_grad=True) for k, v in params.items()}
    _, _, logits = arch.forward(tensors, batch, cfg)
    probs = ad.exp(ad.log_softmax(logits["charge"]))
    residual = ad.add(probs, ad.neg(ad.Tensor(probs.value.copy())))
    loss = ad.reduce_mean(ad.mul(residual, residual))
    ad.backward(loss)
    grads = [t.grad for t in tensors.values() if t.grad is not None]
    if not grads:
        return 0.0
    return ad.global_norm(grads)
