#!/usr/bin/env python3
"""Build a fully labeled synthetic charge corpus.

Real charge corpora are closed data, so the toolkit plants its own signal:
eight synthetic offences, each with phrase pools for the four criminal
elements (subject, mental state, conduct, object) plus filler sentences.
Because every sentence is generated from a known pool, the per-sentence
element annotations are exact by construction, and the three confusing
charge pairs give the sensitivity audit something to flip.
"""
from pathlib import Path

from fetaudit.corpus import save_annotations, save_cases, segment_check, ELEMENT_KINDS
from fetaudit.synth import default_synth_spec, generate_synthetic

out_dir = Path(__file__).parent / "_out" / "corpus"
out_dir.mkdir(parents=True, exist_ok=True)

# One seed drives everything: rerunning this script reproduces the corpus
# byte for byte.
spec = default_synth_spec(
    cases_per_charge=30, innocent_fraction=0.25, noise_rate=0.1, seed=2024
)
caseset, annotated = generate_synthetic(spec)

print(f"{len(caseset)} cases over charges: {', '.join(caseset.charges)}")
print()

# A guilty case carries one sentence per element; innocent cases miss at
# least one element, which is exactly what "presumption of innocence"
# will later test for.
example = annotated.entries[0]
print(f"example case {example.case.id} ({example.case.charge}):")
for sentence, labels in zip(example.case.sentences, example.labels):
    tag = ",".join(sorted(k.short for k in labels)) or "NA"
    print(f"  [{tag:11s}] {' '.join(sentence)}")
print()

report = segment_check(caseset, annotated)
print("per-charge sentence counts by element (the annotation inventory):")
header = "charge".ljust(22) + "".join(k.short.rjust(6) for k in ELEMENT_KINDS) + "NA".rjust(6)
print(header)
for charge, row in sorted(report.element_sentence_counts.items()):
    cells = "".join(str(row[k.short]).rjust(6) for k in ELEMENT_KINDS)
    print(charge.ljust(22) + cells + str(row["NA"]).rjust(6))
print()
print(f"splits: {report.cases_per_split}")

save_cases(caseset, out_dir / "cases.jsonl")
save_annotations(annotated, out_dir / "annotations.jsonl")
spec.save_json(out_dir / "synth_spec.json")
print(f"\nwrote cases.jsonl / annotations.jsonl / synth_spec.json to {out_dir}")
