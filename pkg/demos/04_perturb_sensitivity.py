#!/usr/bin/env python3
"""Sensitive principle: does the model notice a confusing charge's
circumstance, or only its common phrasing?

Forcible seizure and robbery share three elements; in this corpus robbery
reads like a seizure plus a weapon circumstance. Training data realizes
the weapon knowledge ONLY through the common phrasing ("brandishing one
steel knife"). The audit inserts either the common or the uncommon
circumstance into seizure cases and measures the retention ratio: the
fraction still predicted as the original charge.

A model that learned the legal knowledge flips on both. A model that
memorized the textual pattern flips only on the phrasing it saw, which is
exactly what the trained classifier does below (and what large document
classifiers did in the experiments this toolkit operationalizes).
"""
from fetaudit.models import TrainConfig, build_oracle_bundle, train
from fetaudit.perturb import apply_rule, builtin_rules, run_perturbation
from fetaudit.synth import SynthSpec, default_synth_spec, generate_synthetic

base = default_synth_spec()
spec = SynthSpec(
    templates=tuple(t for t in base.templates if t.name in ("forcible_seizure", "robbery")),
    pairs=tuple(p for p in base.pairs if p.source == "forcible_seizure"),
    cases_per_charge=60,
    innocent_fraction=0.0,
    noise_rate=0.0,
    seed=77,
)
caseset, annotated = generate_synthetic(spec)
rules = builtin_rules("synthetic", spec)

# show one perturbation
entry = next(e for e in annotated if e.case.charge == "forcible_seizure")
perturbed = apply_rule(entry, rules[0])
print("original sentences:")
for s in entry.case.sentences:
    print("   ", " ".join(s))
print(f"perturbed ({rules[0].rule_id}):")
for s in perturbed.sentences:
    print("   ", " ".join(s))
print()

print("training a charge classifier on the pair corpus...")
bundle = train(
    "attn_bilstm",
    caseset.by_split("train"),
    caseset.by_split("valid"),
    TrainConfig(embed_dim=24, hidden_dim=24, attn_dim=12, epochs=20, lr=2.0, seed=9),
)
oracle = build_oracle_bundle(spec=spec)

print("\nretention of the original charge (lower = more sensitive)")
print("model".ljust(14) + "circumstance".ljust(38) + "retention")
for model_name, model in (("attn_bilstm", bundle), ("fet_oracle", oracle)):
    for rule in rules:
        result = run_perturbation(model, caseset, rule, n=200, seed=13, annotations=annotated)
        label = f"{rule.commonality} ({rule.circumstance})"
        print(model_name.ljust(14) + label.ljust(38) + f"{result.ratio:.2f}")

print(
    "\nThe trained model flips on the common circumstance (retention 0) "
    "but ignores the unseen uncommon one (retention 1): textual pattern "
    "memorization, not legal knowledge. The oracle flips on both."
)
