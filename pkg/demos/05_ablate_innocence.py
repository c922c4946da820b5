#!/usr/bin/env python3
"""Presumption of innocence: delete one element's sentences and watch the
verdict.

Under the Four Elements Theory a defendant is guilty only if subject,
mental state, conduct and object are all established, so removing every
sentence related to one element should push a trustworthy model to
INNOCENT. The audit removes one element at a time (multi-label sentences
drop whole), re-predicts, and reports the consistency ratio plus the
probability assigned to INNOCENT before and after.
"""
from fetaudit.ablate import confidence_summary, run_ablation
from fetaudit.corpus import ELEMENT_KINDS
from fetaudit.models import TrainConfig, build_oracle_bundle, train
from fetaudit.synth import default_synth_spec, generate_synthetic

spec = default_synth_spec(
    cases_per_charge=30, innocent_fraction=0.25, noise_rate=0.0, seed=2024
)
caseset, annotated = generate_synthetic(spec)

print("training the model under audit...")
bundle = train(
    "attn_bilstm",
    caseset.by_split("train"),
    caseset.by_split("valid"),
    TrainConfig(epochs=35, lr=2.0, seed=3),
)
oracle = build_oracle_bundle(spec=spec)

print("\nconsistency = fraction of guilty cases whose prediction is unchanged")
print("element".ljust(14) + "consistency".rjust(12) + "P(innocent) before -> after".rjust(34))
results = []
for kind in ELEMENT_KINDS:
    r = run_ablation(bundle, annotated, kind)
    results.append(r)
    print(
        kind.value.ljust(14)
        + f"{r.consistency:.3f}".rjust(12)
        + f"{r.mean_innocent_before:.3f} -> {r.mean_innocent_after:.3f}".rjust(34)
    )

oracle_result = run_ablation(oracle, annotated, ELEMENT_KINDS[0])
print(
    f"\nfet_oracle, for contrast: consistency {oracle_result.consistency:.1f}, "
    f"P(innocent) after removal {oracle_result.pairs[0].p_innocent_after:.1f}"
)

# five-number summaries of the innocent probability per condition, the
# data behind a boxplot figure
summary = confidence_summary(results)
print("\nP(innocent) five-number summary per condition")
print("condition".ljust(12) + "min".rjust(8) + "q1".rjust(8) + "median".rjust(8) + "q3".rjust(8) + "max".rjust(8))
for cond in summary.conditions:
    five = cond.innocent.five_number.as_tuple()
    print(cond.condition.ljust(12) + "".join(f"{v:.3f}".rjust(8) for v in five))

print(
    "\nThe trained model mostly sticks to its verdicts on incomplete facts "
    "(consistency well above 0.5) while only nudging P(innocent) upward: "
    "it does not implement the presumption of innocence, unlike the oracle."
)
