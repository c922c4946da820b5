#!/usr/bin/env python3
"""The whole pipeline through the command line.

Four subcommands chain into a reproducible audit: `synth` writes the
corpus, `train` produces model bundles, `audit` runs the three principle
checks for every bundle, and `render` turns the result files into text
tables plus numeric figure data. Everything below runs in-process via the
CLI entry point; the equivalent shell session is printed as it goes.
"""
import json
from pathlib import Path

from fetaudit.cli import main

root = Path(__file__).parent / "_out" / "cli_demo"
root.mkdir(parents=True, exist_ok=True)


def run(argv):
    print(f"\n$ fetaudit {' '.join(str(a) for a in argv)}")
    code = main([str(a) for a in argv])
    assert code == 0, f"exit code {code}"


corpus = root / "corpus"
(root / "synth.json").write_text(
    json.dumps({"builtin": {"cases_per_charge": 12, "innocent_fraction": 0.25, "seed": 404}})
)
run(["synth", "--config", root / "synth.json", "--out", corpus])

# a trained bundle and the rule-based reference bundle
(root / "train_bilstm.json").write_text(
    json.dumps(
        {
            "architecture": "attn_bilstm",
            "corpus": {"cases": str(corpus / "cases.jsonl")},
            "seed": 7,
            "epochs": 20,
            "lr": 2.0,
            "dims": {"embed": 24, "hidden": 24, "attention": 12},
        }
    )
)
run(["train", "--config", root / "train_bilstm.json", "--out", root / "models"])

(root / "train_oracle.json").write_text(
    json.dumps(
        {
            "architecture": "fet_oracle",
            "corpus": {
                "cases": str(corpus / "cases.jsonl"),
                "synth_spec": str(corpus / "synth_spec.json"),
            },
        }
    )
)
run(["train", "--config", root / "train_oracle.json", "--out", root / "models"])

(root / "audit.json").write_text(
    json.dumps(
        {
            "seed": 99,
            "corpus": {
                "cases": str(corpus / "cases.jsonl"),
                "annotations": str(corpus / "annotations.jsonl"),
                "synth_spec": str(corpus / "synth_spec.json"),
            },
            "bundles": [
                str(root / "models" / "attn_bilstm.bundle"),
                str(root / "models" / "fet_oracle.bundle"),
            ],
            "probe": {"k": 4, "iters": 400},
            "perturb": {"rules": "builtin:synthetic", "n": 50},
        }
    )
)
run(["audit", "--config", root / "audit.json", "--out", root / "report"])
run(["render", root / "report"])

print(f"\nresult files live under {root / 'report'}; figure data under render/")
